#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "craft/geometry.hpp"
#include "craft/image.hpp"

namespace craft {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    int canonical_width = 64;
    int canonical_height = 64;
    int patch = 8;
    int channels = 3;
    int dim = 64;
    bool use_tanh = true;
    /// Gain of the patch-embedding matrix; entries are N(0, (scale^2) / (P*P*C)).
    double weight_scale = 12.0;
    /// Prototype tiles are 0.5 + contrast * U(-1, 1) per pixel.
    double tile_contrast = 0.08;
    /// Prototype tiles are redrawn until their embedding's |cosine| to every
    /// earlier category stays below this bound.
    double max_embedding_cosine = 0.35;
    double theta_cap = 0.5;
    double theta_det = 0.5;
    double theta_locmap = 0.5;
    std::uint64_t seed = 0;

    int patch_dim() const { return patch * patch * channels; }
    int grid_cols() const { return canonical_width / patch; }
    int grid_rows() const { return canonical_height / patch; }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct CategoryInfo {
    std::string name;
    std::string supercategory;
};

struct Category {
    int id = 0;
    std::string name;
    std::string supercategory;
};

class CategoryTable {
public:
    CategoryTable() = default;
    CategoryTable(std::vector<Category> cats, std::vector<double> embeddings, std::vector<double> tiles, int dim,
                  int tile_size);

    int size() const { return static_cast<int>(categories_.size()); }
    const Category& at(int id) const { return categories_.at(static_cast<std::size_t>(id)); }
    const std::vector<Category>& all() const { return categories_; }
    std::optional<int> find(std::string_view name) const;
    /// Like find, but throws ModelError for unknown names.
    int require(std::string_view name) const;

    /// Unit-norm text embedding of a category.
    std::span<const double> embedding(int id) const;
    /// P x P x C prototype tile, row-major with interleaved channels.
    std::span<const double> tile(int id) const;

private:
    std::vector<Category> categories_;
    std::vector<double> embeddings_;
    std::vector<double> tiles_;
    int dim_ = 0;
    int tile_size_ = 0;
};

/// Grid of per-token feature vectors; token (i, j) is column i, row j.
struct TokenFeatureGrid {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<double> data;

    TokenFeatureGrid() = default;
    TokenFeatureGrid(int r, int c, int d) : rows(r), cols(c), dim(d), data(static_cast<std::size_t>(r) * c * d, 0.0) {}

    std::span<double> at(int i, int j) {
        return {data.data() + (static_cast<std::size_t>(j) * cols + i) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> at(int i, int j) const {
        return {data.data() + (static_cast<std::size_t>(j) * cols + i) * dim, static_cast<std::size_t>(dim)};
    }

    friend bool operator==(const TokenFeatureGrid&, const TokenFeatureGrid&) = default;
};

/// Scalar objective over a token feature grid. Implementations live with the attacks.
class FeatureLoss {
public:
    virtual ~FeatureLoss() = default;

    /// Tokens the loss reads. Tokens outside are neither encoded nor differentiated.
    virtual BoolGrid support(int rows, int cols) const;

    /// Loss value; when grad is non-null it has the grid's shape, is zeroed, and
    /// receives dL/dfeature for every supported token.
    virtual double evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const = 0;
};

struct LossGradient {
    double loss = 0.0;
    Image gradient;
};

class Model {
public:
    /// Deterministic construction from cfg.seed: embedding matrix, then prototype tiles.
    static Model build(const ModelConfig& cfg, std::span<const CategoryInfo> categories);

    /// Explicit weights (dim x P*P*C, row-major) and tiles (one P*P*C block per category).
    static Model from_parts(const ModelConfig& cfg, std::vector<double> weights,
                            std::span<const CategoryInfo> categories, std::vector<double> tiles);

    const ModelConfig& config() const { return cfg_; }
    const CategoryTable& categories() const { return table_; }
    std::span<const double> weights() const { return weights_; }

    GridGeometry canonical_geometry() const;
    GridGeometry geometry(double source_width, double source_height) const;

    TokenFeatureGrid encode(const Image& img) const;
    TokenFeatureGrid encode(const Image& img, const BoolGrid& support) const;

    /// Feature of a single flattened patch.
    std::vector<double> encode_patch(std::span<const double> patch) const;

    LossGradient loss_and_gradient(const Image& img, const FeatureLoss& loss) const;

private:
    void check_image(const Image& img) const;

    ModelConfig cfg_;
    std::vector<double> weights_;
    CategoryTable table_;
};

inline TokenFeatureGrid encode_image(const Model& m, const Image& img) { return m.encode(img); }
inline LossGradient grad_loss_wrt_image(const Model& m, const Image& img, const FeatureLoss& loss) {
    return m.loss_and_gradient(img, loss);
}

/// Cosine similarity; zero when either vector has zero norm.
double cosine_or_zero(std::span<const double> a, std::span<const double> b);

/// Mean feature over the cells of rect.
std::vector<double> mean_pool(const TokenFeatureGrid& feats, const TokenRect& rect);

/// Per-token cosine to the category embedding, row-major.
std::vector<double> similarity_map(const Model& m, const TokenFeatureGrid& feats, int category);

struct CaptionOutput {
    std::vector<int> categories;
    std::vector<double> scores;
    std::string text;
};

struct Detection {
    BBox box;
    int category = 0;
    double score = 0.0;
};

struct TaskOutputs {
    CaptionOutput caption;
    std::vector<Detection> detections;
    int region_label = 0;
    std::optional<BBox> loc_box;
};

CaptionOutput caption_head(const Model& m, const TokenFeatureGrid& feats);
std::vector<Detection> detect_head(const Model& m, const TokenFeatureGrid& feats, const GridGeometry& g);
int region_head(const Model& m, const TokenFeatureGrid& feats, const BBox& box, const GridGeometry& g);
std::optional<BBox> localize_head(const Model& m, const TokenFeatureGrid& feats, int category, const GridGeometry& g);

/// All four heads on one feature grid.
TaskOutputs run_heads(const Model& m, const TokenFeatureGrid& feats, const GridGeometry& g, const BBox& region,
                      int localize_category);

}  // namespace craft
