#pragma once

#include "gbpandas/analysis.hpp"
#include "gbpandas/capacity.hpp"
#include "gbpandas/engine.hpp"
#include "gbpandas/errors.hpp"
#include "gbpandas/experiment.hpp"
#include "gbpandas/policies.hpp"
#include "gbpandas/policy.hpp"
#include "gbpandas/rng.hpp"
#include "gbpandas/simplex.hpp"
#include "gbpandas/state.hpp"
#include "gbpandas/stochastic.hpp"
#include "gbpandas/topology.hpp"
