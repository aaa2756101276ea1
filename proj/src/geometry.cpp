#include "craft/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace craft {

namespace {

// Quotients that land within rounding noise of an integer are treated as that
// integer, so tokens_to_box -> box_to_tokens is stable.
double snap(double q) {
    const double r = std::round(q);
    return std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q)) ? r : q;
}

}  // namespace

void GridGeometry::validate() const {
    if (!(source_width > 0.0) || !(source_height > 0.0)) {
        throw GeometryError("grid geometry: source size must be positive");
    }
    if (canonical_width <= 0 || canonical_height <= 0 || patch <= 0) {
        throw GeometryError("grid geometry: canonical size and patch must be positive");
    }
    if (canonical_width % patch != 0 || canonical_height % patch != 0) {
        throw GeometryError("grid geometry: patch " + std::to_string(patch) +
                            " does not divide canonical size " + std::to_string(canonical_width) + "x" +
                            std::to_string(canonical_height));
    }
}

double iou(const BBox& a, const BBox& b) {
    if (!(a.x1 < a.x2 && a.y1 < a.y2) || !(b.x1 < b.x2 && b.y1 < b.y2)) {
        throw GeometryError("iou: degenerate box");
    }
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

TokenRect box_to_tokens(const BBox& box, const GridGeometry& g) {
    g.validate();
    if (!box.within(g.source_width, g.source_height)) {
        throw GeometryError("box_to_tokens: box outside image bounds or degenerate");
    }
    const double sx = g.source_width * g.patch;
    const double sy = g.source_height * g.patch;
    const int cols = g.grid_cols();
    const int rows = g.grid_rows();

    TokenRect r;
    r.i_min = static_cast<int>(std::floor(snap(box.x1 * g.canonical_width / sx)));
    r.i_max = static_cast<int>(std::ceil(snap(box.x2 * g.canonical_width / sx)));
    r.j_min = static_cast<int>(std::floor(snap(box.y1 * g.canonical_height / sy)));
    r.j_max = static_cast<int>(std::ceil(snap(box.y2 * g.canonical_height / sy)));

    r.i_min = std::clamp(r.i_min, 0, cols - 1);
    r.j_min = std::clamp(r.j_min, 0, rows - 1);
    r.i_max = std::clamp(r.i_max, r.i_min + 1, cols);
    r.j_max = std::clamp(r.j_max, r.j_min + 1, rows);
    return r;
}

BBox tokens_to_box(const TokenRect& rect, const GridGeometry& g) {
    g.validate();
    if (!(rect.i_min >= 0 && rect.i_min < rect.i_max && rect.i_max <= g.grid_cols() && rect.j_min >= 0 &&
          rect.j_min < rect.j_max && rect.j_max <= g.grid_rows())) {
        throw GeometryError("tokens_to_box: token rect outside grid");
    }
    const double kx = static_cast<double>(g.patch) * g.source_width / g.canonical_width;
    const double ky = static_cast<double>(g.patch) * g.source_height / g.canonical_height;
    BBox b{rect.i_min * kx, rect.j_min * ky, rect.i_max * kx, rect.j_max * ky};
    // Keep the far edge exactly on the image border for full-width rects.
    if (rect.i_max == g.grid_cols()) b.x2 = g.source_width;
    if (rect.j_max == g.grid_rows()) b.y2 = g.source_height;
    return b;
}

std::vector<Component> connected_components(const BoolGrid& mask) {
    std::vector<Component> out;
    std::vector<char> seen(mask.cells.size(), 0);
    std::vector<TokenCell> stack;

    for (int j = 0; j < mask.rows; ++j) {
        for (int i = 0; i < mask.cols; ++i) {
            const std::size_t idx = static_cast<std::size_t>(j) * mask.cols + i;
            if (!mask.cells[idx] || seen[idx]) continue;

            Component comp;
            comp.rect = {i, i + 1, j, j + 1};
            seen[idx] = 1;
            stack.push_back({i, j});
            while (!stack.empty()) {
                const TokenCell c = stack.back();
                stack.pop_back();
                comp.cells.push_back(c);
                comp.rect.i_min = std::min(comp.rect.i_min, c.i);
                comp.rect.i_max = std::max(comp.rect.i_max, c.i + 1);
                comp.rect.j_min = std::min(comp.rect.j_min, c.j);
                comp.rect.j_max = std::max(comp.rect.j_max, c.j + 1);

                const TokenCell nbrs[4] = {{c.i - 1, c.j}, {c.i + 1, c.j}, {c.i, c.j - 1}, {c.i, c.j + 1}};
                for (const TokenCell& n : nbrs) {
                    if (n.i < 0 || n.j < 0 || n.i >= mask.cols || n.j >= mask.rows) continue;
                    const std::size_t nidx = static_cast<std::size_t>(n.j) * mask.cols + n.i;
                    if (mask.cells[nidx] && !seen[nidx]) {
                        seen[nidx] = 1;
                        stack.push_back(n);
                    }
                }
            }
            std::sort(comp.cells.begin(), comp.cells.end(), [](const TokenCell& a, const TokenCell& b) {
                return a.j != b.j ? a.j < b.j : a.i < b.i;
            });
            out.push_back(std::move(comp));
        }
    }
    return out;
}

}  // namespace craft
