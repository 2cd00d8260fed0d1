// Copyright 2026 The gavg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef GAVG_GAVG_HPP
#define GAVG_GAVG_HPP

#include "gavg/asymptotics.hpp"
#include "gavg/core.hpp"
#include "gavg/diagnostics.hpp"
#include "gavg/experiment.hpp"
#include "gavg/objectives.hpp"
#include "gavg/optimizers.hpp"
#include "gavg/rng.hpp"
#include "gavg/schedules.hpp"
#include "gavg/trace.hpp"

#endif  // GAVG_GAVG_HPP
