/*
 * cardioshape
 *
 * Copyright 2026 The cardioshape Authors
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

#include "cardioshape/error.hpp"
#include "cardioshape/nearest.hpp"
#include "cardioshape/optim.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cardioshape;
using namespace cardioshape::testing;

TEST_SUITE("nearest") {
  TEST_CASE("grid queries equal the exhaustive scan") {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
      const Points pts = random_points(rng, 50 + 300 * trial, 10.0 + 20.0 * trial);
      const PointGrid grid(pts);
      for (int q = 0; q < 300; ++q) {
        const Vec3 query = 40.0 * Vec3(rng.normal(), rng.normal(), rng.normal());
        const NearestHit a = grid.nearest(query);
        const NearestHit b = nearest_brute_force(pts, query);
        CHECK(a.index == b.index);
        CHECK(a.distance == b.distance);
      }
    }
  }

  TEST_CASE("flat and collinear clouds") {
    Rng rng(2);
    Points plane = random_points(rng, 400, 20.0);
    plane.row(2).setConstant(7.0);
    Points line = Points::Zero(3, 100);
    for (int i = 0; i < 100; ++i) line(0, i) = i * 0.5;
    for (const Points* pts : {&plane, &line}) {
      const PointGrid grid(*pts);
      for (int q = 0; q < 200; ++q) {
        const Vec3 query = 30.0 * Vec3(rng.normal(), rng.normal(), rng.normal());
        CHECK(grid.nearest(query).index == nearest_brute_force(*pts, query).index);
      }
    }
  }

  TEST_CASE("ties resolve to the lowest index") {
    Points pts(3, 4);
    pts << 1, -1, 1, -1, 0, 0, 0, 0, 0, 0, 0, 0;
    const PointGrid grid(pts);
    CHECK(grid.nearest(Vec3::Zero()).index == 0);
    CHECK(nearest_brute_force(pts, Vec3::Zero()).index == 0);
    CHECK(grid.nearest(Vec3(-0.5, 0, 0)).index == 1);
  }
}

TEST_SUITE("optim") {
  TEST_CASE("first step moves each parameter by the learning rate") {
    AdamState adam(AdamOptions{0.1});
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.0;
    Eigen::VectorXd g(3);
    g << 5.0, -0.01, 0.0;
    adam.step(x, g);
    CHECK(x[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(-1.9).epsilon(1e-5));
    CHECK(x[2] == 0.0);
    CHECK(adam.steps() == 1);
  }

  TEST_CASE("minimizes a convex quadratic") {
    AdamState adam(AdamOptions{0.05});
    Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 3.0);
    Eigen::VectorXd c(4);
    c << 1, -1, 0.5, 2;
    for (int i = 0; i < 3000; ++i) adam.step(x, 2.0 * (x - c));
    CHECK((x - c).norm() < 1e-3);
  }

  TEST_CASE("errors") {
    AdamState adam(AdamOptions{0.1});
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd bad(2);
    bad << 1.0, std::nan("");
    CHECK_THROWS_AS(adam.step(x, bad), Error);
    adam.reset();
    adam.step(x, Eigen::VectorXd::Ones(2));
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(adam.step(y, Eigen::VectorXd::Ones(3)), ValidationError);
    CHECK_THROWS_AS(AdamOptions{-1.0}.validate(), ValidationError);
  }
}
