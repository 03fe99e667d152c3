#pragma once

#include "detreg/baselines.hpp"
#include "detreg/candidates.hpp"
#include "detreg/evaluation.hpp"
#include "detreg/geometry.hpp"
#include "detreg/inference.hpp"
#include "detreg/io.hpp"
#include "detreg/oracle.hpp"
#include "detreg/regularizers.hpp"
#include "detreg/rng.hpp"
#include "detreg/similarity.hpp"
#include "detreg/synthesis.hpp"
#include "detreg/taxonomy.hpp"
