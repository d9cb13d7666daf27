#pragma once

#include "roving/approx.hpp"
#include "roving/distributions.hpp"
#include "roving/error.hpp"
#include "roving/fluid.hpp"
#include "roving/ht.hpp"
#include "roving/lt.hpp"
#include "roving/model.hpp"
#include "roving/mtbp.hpp"
#include "roving/random.hpp"
#include "roving/scenario.hpp"
#include "roving/sim.hpp"
