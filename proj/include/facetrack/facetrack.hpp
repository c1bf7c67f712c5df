/*
 * facetrack - blendshape coefficient and head pose estimation from RGB-D data.
 *
 * Copyright 2026 The facetrack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef FACETRACK_FACETRACK_HPP_
#define FACETRACK_FACETRACK_HPP_

#include "facetrack/bsc_solver.hpp"
#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/io/depth.hpp"
#include "facetrack/io/documents.hpp"
#include "facetrack/io/examples.hpp"
#include "facetrack/io/obj.hpp"
#include "facetrack/io/sequence.hpp"
#include "facetrack/metrics.hpp"
#include "facetrack/parallel.hpp"
#include "facetrack/personalize.hpp"
#include "facetrack/rigid_icp.hpp"
#include "facetrack/sequence.hpp"
#include "facetrack/synth.hpp"

#endif // FACETRACK_FACETRACK_HPP_
