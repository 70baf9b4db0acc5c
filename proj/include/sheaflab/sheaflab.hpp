// Copyright 2026 The sheaflab Authors.
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

#include "sheaflab/config.hpp"
#include "sheaflab/data_io.hpp"
#include "sheaflab/error.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/laplacian.hpp"
#include "sheaflab/model.hpp"
#include "sheaflab/random.hpp"
#include "sheaflab/sheaf.hpp"
#include "sheaflab/train.hpp"
