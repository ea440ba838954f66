/* Copyright 2026 The lbar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Umbrella header for the lbar library.

#pragma once

#include "lbar/audio_aug.hpp"
#include "lbar/checkpoint.hpp"
#include "lbar/config.hpp"
#include "lbar/data/dataset.hpp"
#include "lbar/data/features.hpp"
#include "lbar/data/normalize.hpp"
#include "lbar/data/text.hpp"
#include "lbar/data/waveform.hpp"
#include "lbar/error.hpp"
#include "lbar/eval.hpp"
#include "lbar/model.hpp"
#include "lbar/rng.hpp"
#include "lbar/smbo.hpp"
#include "lbar/text_aug.hpp"
#include "lbar/trainer.hpp"
