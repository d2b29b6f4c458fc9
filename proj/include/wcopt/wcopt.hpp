#pragma once

#include "wcopt/core.hpp"
#include "wcopt/envelope.hpp"
#include "wcopt/mirror.hpp"
#include "wcopt/model.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/rng.hpp"
#include "wcopt/solver.hpp"
#include "wcopt/stepsize.hpp"
