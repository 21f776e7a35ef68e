/*
 * Copyright (c) 2026, The DeepView-NLP Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <string>
#include <string_view>

#include "deepview/pipeline.hpp"

namespace deepview {

/// Fixed 10-colour cycle; class c uses entry c % 10.
const std::array<std::string_view, 10>& class_palette();

struct RenderOptions {
  double plot_size = 800.0;  // pixels, square plot area
  double point_radius = 4.0;
  double ring_radius = 8.0;
};

/**
 * Static SVG scene. Grid cells are <rect>s in the class colour with
 * fill-opacity equal to the certainty; points are <circle class="point">
 * coloured by true label (grey when unknown); mismatched points get one extra
 * <circle class="ring">. The legend uses <path> swatches so element counts of
 * rects and circles reflect only cells and points. Output is byte-stable.
 */
std::string render_svg(const VisPayload& payload, const RenderOptions& options = {});

}  // namespace deepview
