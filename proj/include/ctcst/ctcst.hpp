// Copyright 2026 The ctcst Authors
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

#include "ctcst/augment.hpp"
#include "ctcst/checkpoint.hpp"
#include "ctcst/common.hpp"
#include "ctcst/corpus.hpp"
#include "ctcst/ctc.hpp"
#include "ctcst/decode.hpp"
#include "ctcst/eval.hpp"
#include "ctcst/experiment.hpp"
#include "ctcst/matrix.hpp"
#include "ctcst/model.hpp"
#include "ctcst/numeric.hpp"
#include "ctcst/parallel.hpp"
#include "ctcst/rng.hpp"
#include "ctcst/selftrain.hpp"
