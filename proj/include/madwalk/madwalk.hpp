#pragma once

#include "madwalk/config.hpp"
#include "madwalk/coupling.hpp"
#include "madwalk/error.hpp"
#include "madwalk/formulas.hpp"
#include "madwalk/oracle.hpp"
#include "madwalk/rng.hpp"
#include "madwalk/rubin.hpp"
#include "madwalk/stats.hpp"
#include "madwalk/tree.hpp"
#include "madwalk/verify.hpp"
#include "madwalk/walk.hpp"
