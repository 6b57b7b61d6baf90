#pragma once

#include "zoprox/error.hpp"
#include "zoprox/estimators.hpp"
#include "zoprox/libsvm.hpp"
#include "zoprox/oracle.hpp"
#include "zoprox/problems.hpp"
#include "zoprox/prox.hpp"
#include "zoprox/rng.hpp"
#include "zoprox/solvers.hpp"
#include "zoprox/subproblem.hpp"
#include "zoprox/vector_ops.hpp"
