#pragma once

#include "cotic/array.hpp"
#include "cotic/autodiff.hpp"
#include "cotic/conv.hpp"
#include "cotic/errors.hpp"
#include "cotic/evaluation.hpp"
#include "cotic/events.hpp"
#include "cotic/hawkes.hpp"
#include "cotic/losses.hpp"
#include "cotic/model.hpp"
#include "cotic/nn.hpp"
#include "cotic/rng.hpp"
#include "cotic/training.hpp"
