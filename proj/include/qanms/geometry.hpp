// Copyright 2026 The qanms Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>

namespace qanms {

/// Axis-aligned box in continuous pixel coordinates. (x1, y1) is the top-left
/// corner and (x2, y2) the bottom-right one; there is no "+1" pixel
/// convention. Zero-area boxes are valid, negative extents are not.
class Box {
 public:
  Box() = default;
  /// Throws std::invalid_argument on non-finite coordinates or x2 < x1 /
  /// y2 < y1.
  Box(double x1, double y1, double x2, double y2);

  static Box from_array(const std::array<double, 4>& c) {
    return Box(c[0], c[1], c[2], c[3]);
  }

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  std::array<double, 4> to_array() const { return {x1_, y1_, x2_, y2_}; }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x1_ = 0.0;
  double y1_ = 0.0;
  double x2_ = 0.0;
  double y2_ = 0.0;
};

double area(const Box& b);

/// Intersection over union. Two boxes whose union has zero area overlap by 0.
double iou(const Box& a, const Box& b);

}  // namespace qanms
