#pragma once

#include "cpcca/error.hpp"
#include "cpcca/random.hpp"
#include "cpcca/matrix_core.hpp"
#include "cpcca/matrix_io.hpp"
#include "cpcca/spectral.hpp"
#include "cpcca/optimize.hpp"
#include "cpcca/permutation.hpp"
#include "cpcca/pcca.hpp"
#include "cpcca/serialize.hpp"
#include "cpcca/bench.hpp"
