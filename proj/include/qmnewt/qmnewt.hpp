#pragma once

#include "qmnewt/errors.hpp"
#include "qmnewt/core_state.hpp"
#include "qmnewt/linalg.hpp"
#include "qmnewt/model_simplified.hpp"
#include "qmnewt/model_full.hpp"
#include "qmnewt/config.hpp"
#include "qmnewt/model_update.hpp"
#include "qmnewt/problems.hpp"
#include "qmnewt/diagnostics.hpp"
#include "qmnewt/solver.hpp"
#include "qmnewt/fd_newton.hpp"
