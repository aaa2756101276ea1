#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <utility>

#include "craft/geometry.hpp"
#include "craft/random.hpp"
#include "oracles.hpp"

using namespace craft;

namespace {

GridGeometry unit_grid(int side) { return {double(side), double(side), side, side, 1}; }

}  // namespace

TEST_CASE("iou examples") {
    CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
    CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
    CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
}

TEST_CASE("iou rejects degenerate boxes") {
    CHECK_THROWS_AS(iou({0, 0, 0, 10}, {0, 0, 10, 10}), GeometryError);
    CHECK_THROWS_AS(iou({0, 0, 10, 10}, {3, 5, 4, 5}), GeometryError);
    CHECK_THROWS_AS(iou({5, 0, 1, 10}, {0, 0, 10, 10}), GeometryError);
}

TEST_CASE("iou matches the raster oracle and is symmetric") {
    Rng rng(11);
    for (int n = 0; n < 1000; ++n) {
        int b[8];
        for (int k = 0; k < 2; ++k) {
            b[4 * k] = rng.integer(0, 30);
            b[4 * k + 2] = rng.integer(b[4 * k] + 1, 32);
            b[4 * k + 1] = rng.integer(0, 30);
            b[4 * k + 3] = rng.integer(b[4 * k + 1] + 1, 32);
        }
        const BBox a{double(b[0]), double(b[1]), double(b[2]), double(b[3])};
        const BBox c{double(b[4]), double(b[5]), double(b[6]), double(b[7])};
        const double expected = oracle::raster_iou(b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]);
        const double got = iou(a, c);
        REQUIRE(std::abs(got - expected) <= 1e-9);
        REQUIRE(got == iou(c, a));
        REQUIRE(got >= 0.0);
        REQUIRE(got <= 1.0);
        REQUIRE((got == 1.0) == (a == c));
    }
}

TEST_CASE("box_to_tokens examples") {
    CHECK(box_to_tokens({0, 0, 5, 5}, unit_grid(8)) == TokenRect{0, 5, 0, 5});
    CHECK(box_to_tokens({64, 64, 320, 320}, {640, 640, 768, 768, 16}) == TokenRect{4, 24, 4, 24});
    CHECK(box_to_tokens({1, 1, 2, 2}, {16, 16, 16, 16, 16}) == TokenRect{0, 1, 0, 1});
}

TEST_CASE("box_to_tokens clamps to the grid") {
    // 7 * 8 / 5 = 11.2 would ceil past the 8-column grid without the clamp.
    const GridGeometry g{7, 7, 8, 8, 1};
    CHECK(box_to_tokens({0, 0, 7, 7}, g) == TokenRect{0, 8, 0, 8});
    CHECK(box_to_tokens({6.5, 6.5, 7, 7}, g) == TokenRect{7, 8, 7, 8});
}

TEST_CASE("box_to_tokens equals the pixel-cover oracle") {
    Rng rng(7);
    for (int n = 0; n < 1000; ++n) {
        const auto c = oracle::random_int_case(rng);
        const TokenRect expected = oracle::pixel_cover(c);
        const TokenRect got = box_to_tokens(oracle::box_of(c), oracle::geometry_of(c));
        INFO("case ", n, " box ", c.x1, ",", c.y1, ",", c.x2, ",", c.y2, " W ", c.W, " H ", c.H, " grid ", c.cols,
             "x", c.rows, " P ", c.P);
        REQUIRE(got == expected);
    }
}

TEST_CASE("tokens_to_box examples") {
    CHECK(tokens_to_box({0, 5, 0, 5}, unit_grid(8)) == BBox{0, 0, 5, 5});
    const BBox b = tokens_to_box({4, 24, 4, 24}, {640, 640, 768, 768, 16});
    CHECK(b.x1 == doctest::Approx(160.0 / 3.0));
    CHECK(b.y1 == doctest::Approx(160.0 / 3.0));
    CHECK(b.x2 == 320.0);
    CHECK(b.y2 == 320.0);
    const GridGeometry g{640, 480, 64, 64, 8};
    CHECK(tokens_to_box(g.full_grid(), g) == BBox{0, 0, 640, 480});
}

TEST_CASE("tokens_to_box contains the original box") {
    const GridGeometry g{640, 640, 768, 768, 16};
    const BBox b{64, 64, 320, 320};
    const BBox back = tokens_to_box(box_to_tokens(b, g), g);
    CHECK(back.x1 <= b.x1);
    CHECK(back.y1 <= b.y1);
    CHECK(back.x2 >= b.x2);
    CHECK(back.y2 >= b.y2);
}

TEST_CASE("token rect round trip") {
    Rng rng(3);
    for (int n = 0; n < 2000; ++n) {
        const int P = rng.integer(1, 16), cols = rng.integer(1, 12), rows = rng.integer(1, 12);
        const GridGeometry g{double(rng.integer(1, 2000)), double(rng.integer(1, 2000)), cols * P, rows * P, P};
        TokenRect r;
        r.i_min = rng.integer(0, cols - 1);
        r.i_max = rng.integer(r.i_min + 1, cols);
        r.j_min = rng.integer(0, rows - 1);
        r.j_max = rng.integer(r.j_min + 1, rows);
        INFO("W ", g.source_width, " H ", g.source_height, " P ", P, " grid ", cols, "x", rows);
        REQUIRE(box_to_tokens(tokens_to_box(r, g), g) == r);
    }
}

TEST_CASE("geometry validation") {
    CHECK_THROWS_AS((GridGeometry{640, 480, 60, 64, 8}.validate()), GeometryError);
    CHECK_THROWS_AS((GridGeometry{0, 480, 64, 64, 8}.validate()), GeometryError);
    CHECK_THROWS_AS((GridGeometry{640, 480, 64, 64, 0}.validate()), GeometryError);
    CHECK_NOTHROW((GridGeometry{640, 480, 64, 64, 8}.validate()));
}

TEST_CASE("connected components examples") {
    BoolGrid empty(4, 5);
    CHECK(connected_components(empty).empty());

    BoolGrid single(5, 5);
    single.set(2, 3);  // row 2, column 3
    const auto one = connected_components(single);
    REQUIRE(one.size() == 1);
    CHECK(one[0].rect == TokenRect{3, 4, 2, 3});
    CHECK(one[0].cells == std::vector<TokenCell>{{3, 2}});

    BoolGrid diag(3, 3);
    diag.set(0, 0);
    diag.set(1, 1);
    CHECK(connected_components(diag).size() == 2);
}

TEST_CASE("connected components order and shape") {
    BoolGrid m(4, 6);
    // An L shape starting at (row 0, col 4) and a bar at row 2.
    m.set(0, 4);
    m.set(1, 4);
    m.set(1, 5);
    m.set(2, 0);
    m.set(2, 1);
    m.set(2, 2);
    const auto comps = connected_components(m);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0].rect == TokenRect{4, 6, 0, 2});
    CHECK(comps[0].cells.size() == 3);
    CHECK(comps[1].rect == TokenRect{0, 3, 2, 3});
}

TEST_CASE("components partition the mask") {
    Rng rng(5);
    for (int n = 0; n < 300; ++n) {
        const int rows = rng.integer(1, 10), cols = rng.integer(1, 10);
        const double density = rng.uniform();
        BoolGrid m(rows, cols);
        for (int j = 0; j < rows; ++j) {
            for (int i = 0; i < cols; ++i) m.set(j, i, rng.uniform() < density);
        }
        const auto comps = connected_components(m);
        std::set<std::pair<int, int>> seen;
        std::pair<int, int> previous_first{-1, -1};
        for (const auto& c : comps) {
            REQUIRE(!c.cells.empty());
            // Row-major order by first cell.
            const std::pair<int, int> first{c.cells.front().j, c.cells.front().i};
            REQUIRE(first > previous_first);
            previous_first = first;
            for (const auto& cell : c.cells) {
                REQUIRE(m.at(cell.j, cell.i));
                REQUIRE(c.rect.contains(cell.i, cell.j));
                REQUIRE(seen.insert({cell.j, cell.i}).second);
            }
            // Tight rect.
            int i0 = cols, i1 = 0, j0 = rows, j1 = 0;
            for (const auto& cell : c.cells) {
                i0 = std::min(i0, cell.i);
                i1 = std::max(i1, cell.i + 1);
                j0 = std::min(j0, cell.j);
                j1 = std::max(j1, cell.j + 1);
            }
            REQUIRE(c.rect == TokenRect{i0, i1, j0, j1});
        }
        long trues = 0;
        for (char v : m.cells) trues += v != 0;
        REQUIRE(static_cast<long>(seen.size()) == trues);
        // No two components are 4-adjacent.
        for (std::size_t a = 0; a < comps.size(); ++a) {
            for (std::size_t b = a + 1; b < comps.size(); ++b) {
                for (const auto& p : comps[a].cells) {
                    for (const auto& q : comps[b].cells) {
                        REQUIRE(std::abs(p.i - q.i) + std::abs(p.j - q.j) > 1);
                    }
                }
            }
        }
    }
}
