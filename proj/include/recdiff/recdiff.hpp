// Copyright 2026 The RecDiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "recdiff/autodiff.hpp"
#include "recdiff/checkpoint.hpp"
#include "recdiff/dataset.hpp"
#include "recdiff/diffusion.hpp"
#include "recdiff/encoder.hpp"
#include "recdiff/error.hpp"
#include "recdiff/graph.hpp"
#include "recdiff/metrics.hpp"
#include "recdiff/model.hpp"
#include "recdiff/optim.hpp"
#include "recdiff/tensor.hpp"
#include "recdiff/train.hpp"
