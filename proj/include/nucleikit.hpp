#pragma once

#include "nucleikit/augment.hpp"
#include "nucleikit/core.hpp"
#include "nucleikit/filter.hpp"
#include "nucleikit/instance.hpp"
#include "nucleikit/io.hpp"
#include "nucleikit/metrics.hpp"
#include "nucleikit/morph.hpp"
#include "nucleikit/rng.hpp"
#include "nucleikit/synth.hpp"
