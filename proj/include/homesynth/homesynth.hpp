// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "homesynth/autodiff.hpp"
#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"
#include "homesynth/metrics.hpp"
#include "homesynth/nets.hpp"
#include "homesynth/synth.hpp"
#include "homesynth/tensor.hpp"
#include "homesynth/trainer.hpp"
