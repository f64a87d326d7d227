#pragma once

#include "drx/tensor/gradcheck.hpp"
#include "drx/tensor/ops.hpp"
#include "drx/tensor/tensor.hpp"
