#pragma once

// Umbrella header for the library.

#include "dmdp/acceptance.hpp"
#include "dmdp/adversary.hpp"
#include "dmdp/bench.hpp"
#include "dmdp/confidence.hpp"
#include "dmdp/config.hpp"
#include "dmdp/estimators.hpp"
#include "dmdp/learners.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/occupancy_opt.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"
