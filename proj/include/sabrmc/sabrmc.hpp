#pragma once

#include "sabrmc/error.hpp"
#include "sabrmc/numerics.hpp"
#include "sabrmc/rng.hpp"
#include "sabrmc/parallel.hpp"
#include "sabrmc/sampling.hpp"
#include "sabrmc/condvar.hpp"
#include "sabrmc/cev.hpp"
#include "sabrmc/engine.hpp"
#include "sabrmc/harness.hpp"
