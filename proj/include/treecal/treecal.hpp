#pragma once

#include "treecal/calibration.hpp"
#include "treecal/config.hpp"
#include "treecal/csv.hpp"
#include "treecal/dataset.hpp"
#include "treecal/error.hpp"
#include "treecal/experiments.hpp"
#include "treecal/forest.hpp"
#include "treecal/parallel.hpp"
#include "treecal/random.hpp"
#include "treecal/resampling.hpp"
#include "treecal/stats.hpp"
#include "treecal/synthetic_data.hpp"
#include "treecal/tree.hpp"
