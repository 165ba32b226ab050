#pragma once

#include "anisoreg/acceptance.hpp"
#include "anisoreg/assumptions.hpp"
#include "anisoreg/estimators.hpp"
#include "anisoreg/io.hpp"
#include "anisoreg/parallel.hpp"
#include "anisoreg/risk.hpp"
#include "anisoreg/rng.hpp"
#include "anisoreg/sampling.hpp"
#include "anisoreg/scenarios.hpp"
#include "anisoreg/spectrum.hpp"
#include "anisoreg/theory.hpp"
