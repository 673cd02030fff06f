// fedul.hpp - umbrella header
#pragma once

#include "fedul/common.hpp"
#include "fedul/dataset.hpp"
#include "fedul/fedsim.hpp"
#include "fedul/metrics.hpp"
#include "fedul/model.hpp"
#include "fedul/objective.hpp"
#include "fedul/rng.hpp"
#include "fedul/runner.hpp"
#include "fedul/schema.hpp"
#include "fedul/split.hpp"
#include "fedul/synth.hpp"
#include "fedul/table.hpp"
#include "fedul/unlearn.hpp"
