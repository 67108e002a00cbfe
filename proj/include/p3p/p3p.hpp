#pragma once

#include "p3p/bench.hpp"
#include "p3p/core.hpp"
#include "p3p/oracle.hpp"
#include "p3p/polyroots.hpp"
#include "p3p/rng.hpp"
#include "p3p/scenegen.hpp"
#include "p3p/solver.hpp"
