#pragma once

// Umbrella header.
#include "mopol/acquisition.hpp"
#include "mopol/common.hpp"
#include "mopol/csv.hpp"
#include "mopol/data.hpp"
#include "mopol/driver.hpp"
#include "mopol/gp.hpp"
#include "mopol/io.hpp"
#include "mopol/pareto.hpp"
#include "mopol/policy_tree.hpp"
#include "mopol/sobol.hpp"
#include "mopol/synth.hpp"
#include "mopol/tree_fit.hpp"
#include "mopol/weights.hpp"
