#pragma once

#include "ambival/config.hpp"
#include "ambival/gaussian.hpp"
#include "ambival/normal.hpp"
#include "ambival/oracle.hpp"
#include "ambival/parallel.hpp"
#include "ambival/priors.hpp"
#include "ambival/region.hpp"
#include "ambival/riskmeasures.hpp"
#include "ambival/rng.hpp"
#include "ambival/scenario.hpp"
#include "ambival/scenario_io.hpp"
#include "ambival/util.hpp"
#include "ambival/valuation.hpp"
#include "ambival/cli.hpp"
