#pragma once

#include "sembench/basis.hpp"
#include "sembench/bench.hpp"
#include "sembench/error.hpp"
#include "sembench/io.hpp"
#include "sembench/kernels.hpp"
#include "sembench/mesh.hpp"
#include "sembench/parallel.hpp"
#include "sembench/state.hpp"
#include "sembench/timeloop.hpp"
#include "sembench/verify.hpp"
