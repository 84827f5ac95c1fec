#pragma once

#include "koopman/dictionary.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/edmd.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"
#include "koopman/measures.hpp"
#include "koopman/moment_sos.hpp"
#include "koopman/polynomial.hpp"
#include "koopman/rng.hpp"
#include "koopman/sdp_solver.hpp"
#include "koopman/sdpa_export.hpp"
#include "koopman/serialization.hpp"
#include "koopman/sparsity_graph.hpp"
#include "koopman/spectral.hpp"
