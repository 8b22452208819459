#pragma once

#include "sfgru/checkpoint.hpp"
#include "sfgru/dataset.hpp"
#include "sfgru/features.hpp"
#include "sfgru/gru.hpp"
#include "sfgru/metrics.hpp"
#include "sfgru/model.hpp"
#include "sfgru/numerics.hpp"
#include "sfgru/sweeps.hpp"
#include "sfgru/train.hpp"
