#pragma once

#include "advice.hpp"
#include "distribution.hpp"
#include "finite_friendly.hpp"
#include "harness.hpp"
#include "lowerbound.hpp"
#include "norm_estimators.hpp"
#include "oracle.hpp"
#include "params.hpp"
#include "primitives.hpp"
#include "procedures.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "tally.hpp"
#include "toplevel.hpp"
#include "zoo.hpp"
