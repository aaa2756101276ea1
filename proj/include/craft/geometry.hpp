#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace craft {

class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box in continuous pixel coordinates of the image it annotates.
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const { return x1 >= 0.0 && y1 >= 0.0 && x1 < x2 && y1 < y2; }
    bool within(double w, double h) const { return valid() && x2 <= w && y2 <= h; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Rectangle of tokens; i runs along width (columns), j along height (rows).
/// Max indices are exclusive.
struct TokenRect {
    int i_min = 0;
    int i_max = 0;
    int j_min = 0;
    int j_max = 0;

    int cols() const { return i_max - i_min; }
    int rows() const { return j_max - j_min; }
    int cell_count() const { return cols() * rows(); }
    bool contains(int i, int j) const { return i >= i_min && i < i_max && j >= j_min && j < j_max; }

    friend bool operator==(const TokenRect&, const TokenRect&) = default;
};

/// Source image size, canonical model size and patch side.
struct GridGeometry {
    double source_width = 0.0;
    double source_height = 0.0;
    int canonical_width = 0;
    int canonical_height = 0;
    int patch = 1;

    int grid_cols() const { return canonical_width / patch; }
    int grid_rows() const { return canonical_height / patch; }
    TokenRect full_grid() const { return {0, grid_cols(), 0, grid_rows()}; }

    /// Throws GeometryError unless all sizes are positive and the patch tiles the canonical size.
    void validate() const;
};

double iou(const BBox& a, const BBox& b);

/// Token cover of a box: floor on the min side, ceil on the max side, clamped to the grid.
TokenRect box_to_tokens(const BBox& box, const GridGeometry& g);

/// Inverse mapping back into source-image pixels.
BBox tokens_to_box(const TokenRect& rect, const GridGeometry& g);

/// Row-major boolean grid.
struct BoolGrid {
    int rows = 0;
    int cols = 0;
    std::vector<char> cells;

    BoolGrid() = default;
    BoolGrid(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, 0) {}

    bool at(int j, int i) const { return cells[static_cast<std::size_t>(j) * cols + i] != 0; }
    void set(int j, int i, bool v = true) { cells[static_cast<std::size_t>(j) * cols + i] = v ? 1 : 0; }
};

struct TokenCell {
    int i = 0;
    int j = 0;
    friend bool operator==(const TokenCell&, const TokenCell&) = default;
};

struct Component {
    TokenRect rect;
    std::vector<TokenCell> cells;
};

/// 4-connected components, ordered by their first cell in row-major scan.
std::vector<Component> connected_components(const BoolGrid& mask);

}  // namespace craft
