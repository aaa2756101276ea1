#include "craft/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "craft/random.hpp"

namespace craft {

void ModelConfig::validate() const {
    if (canonical_width <= 0 || canonical_height <= 0 || patch <= 0 || channels <= 0) {
        throw ModelError("model config: sizes must be positive");
    }
    if (canonical_width % patch != 0 || canonical_height % patch != 0) {
        throw ModelError("model config: patch must divide the canonical size");
    }
    if (dim < 2) throw ModelError("model config: feature dimension must be >= 2");
    for (double t : {theta_cap, theta_det, theta_locmap}) {
        if (!(t > -1.0 && t < 1.0)) throw ModelError("model config: thresholds must lie in (-1, 1)");
    }
    if (!(tile_contrast > 0.0 && tile_contrast <= 0.5)) throw ModelError("model config: tile_contrast must be in (0, 0.5]");
    if (!(weight_scale > 0.0)) throw ModelError("model config: weight_scale must be positive");
    if (!(max_embedding_cosine > 0.0 && max_embedding_cosine <= 1.0)) {
        throw ModelError("model config: max_embedding_cosine must be in (0, 1]");
    }
}

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["geometry"] = {{"width", cfg.canonical_width},
                     {"height", cfg.canonical_height},
                     {"patch", cfg.patch},
                     {"channels", cfg.channels}};
    j["d"] = cfg.dim;
    j["use_tanh"] = cfg.use_tanh;
    j["weight_scale"] = cfg.weight_scale;
    j["tile_contrast"] = cfg.tile_contrast;
    j["max_embedding_cosine"] = cfg.max_embedding_cosine;
    j["thresholds"] = {{"caption", cfg.theta_cap}, {"detect", cfg.theta_det}, {"localize", cfg.theta_locmap}};
    j["seed"] = cfg.seed;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        const auto& g = j.at("geometry");
        cfg.canonical_width = g.at("width").get<int>();
        cfg.canonical_height = g.at("height").get<int>();
        cfg.patch = g.at("patch").get<int>();
        cfg.channels = g.value("channels", 3);
        cfg.dim = j.at("d").get<int>();
        cfg.use_tanh = j.value("use_tanh", cfg.use_tanh);
        cfg.weight_scale = j.value("weight_scale", cfg.weight_scale);
        cfg.tile_contrast = j.value("tile_contrast", cfg.tile_contrast);
        cfg.max_embedding_cosine = j.value("max_embedding_cosine", cfg.max_embedding_cosine);
        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            cfg.theta_cap = t.value("caption", cfg.theta_cap);
            cfg.theta_det = t.value("detect", cfg.theta_det);
            cfg.theta_locmap = t.value("localize", cfg.theta_locmap);
        }
        cfg.seed = j.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("model config json: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

CategoryTable::CategoryTable(std::vector<Category> cats, std::vector<double> embeddings, std::vector<double> tiles,
                             int dim, int tile_size)
    : categories_(std::move(cats)), embeddings_(std::move(embeddings)), tiles_(std::move(tiles)), dim_(dim),
      tile_size_(tile_size) {}

std::optional<int> CategoryTable::find(std::string_view name) const {
    for (const auto& c : categories_) {
        if (c.name == name) return c.id;
    }
    return std::nullopt;
}

int CategoryTable::require(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw ModelError("unknown category '" + std::string(name) + "'");
}

std::span<const double> CategoryTable::embedding(int id) const {
    if (id < 0 || id >= size()) throw ModelError("category id out of range: " + std::to_string(id));
    return {embeddings_.data() + static_cast<std::size_t>(id) * dim_, static_cast<std::size_t>(dim_)};
}

std::span<const double> CategoryTable::tile(int id) const {
    if (id < 0 || id >= size()) throw ModelError("category id out of range: " + std::to_string(id));
    return {tiles_.data() + static_cast<std::size_t>(id) * tile_size_, static_cast<std::size_t>(tile_size_)};
}

BoolGrid FeatureLoss::support(int rows, int cols) const {
    BoolGrid g(rows, cols);
    std::fill(g.cells.begin(), g.cells.end(), 1);
    return g;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void check_names(std::span<const CategoryInfo> categories) {
    std::set<std::string> seen;
    for (const auto& c : categories) {
        if (c.name.empty()) throw ModelError("category names must be non-empty");
        if (!seen.insert(c.name).second) throw ModelError("duplicate category name '" + c.name + "'");
    }
}

std::vector<Category> to_categories(std::span<const CategoryInfo> infos) {
    std::vector<Category> out;
    out.reserve(infos.size());
    for (std::size_t k = 0; k < infos.size(); ++k) {
        out.push_back({static_cast<int>(k), infos[k].name, infos[k].supercategory});
    }
    return out;
}

}  // namespace

std::vector<double> Model::encode_patch(std::span<const double> patch) const {
    const int n = cfg_.patch_dim();
    std::vector<double> f(static_cast<std::size_t>(cfg_.dim));
    for (int r = 0; r < cfg_.dim; ++r) {
        const double z = dot({weights_.data() + static_cast<std::size_t>(r) * n, static_cast<std::size_t>(n)}, patch);
        f[static_cast<std::size_t>(r)] = cfg_.use_tanh ? std::tanh(z) : z;
    }
    return f;
}

Model Model::from_parts(const ModelConfig& cfg, std::vector<double> weights, std::span<const CategoryInfo> categories,
                        std::vector<double> tiles) {
    cfg.validate();
    check_names(categories);
    const auto n = static_cast<std::size_t>(cfg.patch_dim());
    const auto d = static_cast<std::size_t>(cfg.dim);
    if (weights.size() != d * n) throw ModelError("from_parts: weight matrix must be d x P*P*C");
    if (tiles.size() != categories.size() * n) throw ModelError("from_parts: one P*P*C tile per category required");

    Model m;
    m.cfg_ = cfg;
    m.weights_ = std::move(weights);
    std::vector<double> emb(categories.size() * d);
    for (std::size_t c = 0; c < categories.size(); ++c) {
        auto f = m.encode_patch({tiles.data() + c * n, n});
        const double len = norm(f);
        if (!(len > 0.0)) throw ModelError("from_parts: tile of '" + categories[c].name + "' encodes to zero");
        for (std::size_t k = 0; k < d; ++k) emb[c * d + k] = f[k] / len;
    }
    m.table_ = CategoryTable(to_categories(categories), std::move(emb), std::move(tiles), cfg.dim, cfg.patch_dim());
    return m;
}

Model Model::build(const ModelConfig& cfg, std::span<const CategoryInfo> categories) {
    cfg.validate();
    check_names(categories);
    const auto n = static_cast<std::size_t>(cfg.patch_dim());
    const auto d = static_cast<std::size_t>(cfg.dim);

    Rng wrng(derive_seed(cfg.seed, 1));
    std::vector<double> w(d * n);
    const double sd = cfg.weight_scale / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < d; ++r) {
        double mean = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            w[r * n + k] = sd * wrng.normal();
            mean += w[r * n + k];
        }
        mean /= static_cast<double>(n);
        // Zero row sums: flat patches encode to the zero feature.
        for (std::size_t k = 0; k < n; ++k) w[r * n + k] -= mean;
    }

    Model probe;
    probe.cfg_ = cfg;
    probe.weights_ = w;

    Rng trng(derive_seed(cfg.seed, 2));
    std::vector<double> tiles;
    std::vector<std::vector<double>> accepted;
    constexpr int kMaxDraws = 100000;
    for (std::size_t c = 0; c < categories.size(); ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxDraws && !placed; ++attempt) {
            std::vector<double> tile(n);
            for (double& v : tile) {
                v = static_cast<double>(static_cast<float>(0.5 + cfg.tile_contrast * trng.uniform(-1.0, 1.0)));
            }
            auto f = probe.encode_patch(tile);
            const double len = norm(f);
            if (!(len > 0.0)) continue;
            for (double& v : f) v /= len;
            const bool separated = std::all_of(accepted.begin(), accepted.end(), [&](const auto& e) {
                return std::abs(dot(e, f)) <= cfg.max_embedding_cosine;
            });
            if (!separated) continue;
            accepted.push_back(std::move(f));
            tiles.insert(tiles.end(), tile.begin(), tile.end());
            placed = true;
        }
        if (!placed) {
            throw ModelError("build_model: could not draw a separated prototype for '" + categories[c].name +
                             "'; raise max_embedding_cosine or d");
        }
    }
    return from_parts(cfg, std::move(w), categories, std::move(tiles));
}

GridGeometry Model::canonical_geometry() const {
    return geometry(cfg_.canonical_width, cfg_.canonical_height);
}

GridGeometry Model::geometry(double source_width, double source_height) const {
    GridGeometry g{source_width, source_height, cfg_.canonical_width, cfg_.canonical_height, cfg_.patch};
    g.validate();
    return g;
}

void Model::check_image(const Image& img) const {
    if (img.height() != cfg_.canonical_height || img.width() != cfg_.canonical_width ||
        img.channels() != cfg_.channels) {
        throw ModelError("image is " + std::to_string(img.height()) + "x" + std::to_string(img.width()) + "x" +
                         std::to_string(img.channels()) + ", model expects " + std::to_string(cfg_.canonical_height) +
                         "x" + std::to_string(cfg_.canonical_width) + "x" + std::to_string(cfg_.channels));
    }
}

namespace {

void gather_patch(const Image& img, int i, int j, int patch, std::vector<double>& out) {
    const int c = img.channels();
    std::size_t k = 0;
    for (int py = 0; py < patch; ++py) {
        const auto row = img.pixels().subspan(img.index(j * patch + py, i * patch, 0), static_cast<std::size_t>(patch) * c);
        for (double v : row) out[k++] = v;
    }
}

}  // namespace

TokenFeatureGrid Model::encode(const Image& img) const {
    BoolGrid all(cfg_.grid_rows(), cfg_.grid_cols());
    std::fill(all.cells.begin(), all.cells.end(), 1);
    return encode(img, all);
}

TokenFeatureGrid Model::encode(const Image& img, const BoolGrid& support) const {
    check_image(img);
    const int rows = cfg_.grid_rows();
    const int cols = cfg_.grid_cols();
    if (support.rows != rows || support.cols != cols) throw ModelError("encode: support mask shape mismatch");
    TokenFeatureGrid feats(rows, cols, cfg_.dim);
    std::vector<double> patch(static_cast<std::size_t>(cfg_.patch_dim()));
    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < cols; ++i) {
            if (!support.at(j, i)) continue;
            gather_patch(img, i, j, cfg_.patch, patch);
            auto f = encode_patch(patch);
            std::copy(f.begin(), f.end(), feats.at(i, j).begin());
        }
    }
    return feats;
}

LossGradient Model::loss_and_gradient(const Image& img, const FeatureLoss& loss) const {
    check_image(img);
    const int rows = cfg_.grid_rows();
    const int cols = cfg_.grid_cols();
    const BoolGrid support = loss.support(rows, cols);
    const TokenFeatureGrid feats = encode(img, support);

    TokenFeatureGrid dfeat(rows, cols, cfg_.dim);
    LossGradient out{loss.evaluate(feats, &dfeat), Image(img.height(), img.width(), img.channels())};
    if (!std::isfinite(out.loss)) throw ModelError("loss is not finite");

    const auto n = static_cast<std::size_t>(cfg_.patch_dim());
    const int c = img.channels();
    std::vector<double> u(static_cast<std::size_t>(cfg_.dim));
    std::vector<double> gx(n);
    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < cols; ++i) {
            if (!support.at(j, i)) continue;
            const auto g = dfeat.at(i, j);
            const auto f = feats.at(i, j);
            bool any = false;
            for (std::size_t r = 0; r < u.size(); ++r) {
                if (!std::isfinite(g[r])) throw ModelError("feature gradient is not finite");
                u[r] = cfg_.use_tanh ? g[r] * (1.0 - f[r] * f[r]) : g[r];
                any = any || u[r] != 0.0;
            }
            if (!any) continue;
            std::fill(gx.begin(), gx.end(), 0.0);
            for (std::size_t r = 0; r < u.size(); ++r) {
                if (u[r] == 0.0) continue;
                const double* w = weights_.data() + r * n;
                for (std::size_t k = 0; k < n; ++k) gx[k] += u[r] * w[k];
            }
            std::size_t k = 0;
            for (int py = 0; py < cfg_.patch; ++py) {
                auto row = out.gradient.pixels().subspan(out.gradient.index(j * cfg_.patch + py, i * cfg_.patch, 0),
                                                         static_cast<std::size_t>(cfg_.patch) * c);
                for (double& v : row) v = gx[k++];
            }
        }
    }
    return out;
}

double cosine_or_zero(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<double> mean_pool(const TokenFeatureGrid& feats, const TokenRect& rect) {
    std::vector<double> out(static_cast<std::size_t>(feats.dim), 0.0);
    for (int j = rect.j_min; j < rect.j_max; ++j) {
        for (int i = rect.i_min; i < rect.i_max; ++i) {
            const auto f = feats.at(i, j);
            for (std::size_t k = 0; k < out.size(); ++k) out[k] += f[k];
        }
    }
    const double inv = 1.0 / rect.cell_count();
    for (double& v : out) v *= inv;
    return out;
}

std::vector<double> similarity_map(const Model& m, const TokenFeatureGrid& feats, int category) {
    const auto e = m.categories().embedding(category);
    std::vector<double> sims(static_cast<std::size_t>(feats.rows) * feats.cols);
    for (int j = 0; j < feats.rows; ++j) {
        for (int i = 0; i < feats.cols; ++i) {
            sims[static_cast<std::size_t>(j) * feats.cols + i] = cosine_or_zero(feats.at(i, j), e);
        }
    }
    return sims;
}

namespace {

BoolGrid threshold(const std::vector<double>& sims, int rows, int cols, double t) {
    BoolGrid mask(rows, cols);
    for (std::size_t k = 0; k < sims.size(); ++k) mask.cells[k] = sims[k] >= t ? 1 : 0;
    return mask;
}

double component_mean(const Component& comp, const std::vector<double>& sims, int cols) {
    double s = 0.0;
    for (const auto& cell : comp.cells) s += sims[static_cast<std::size_t>(cell.j) * cols + cell.i];
    return s / static_cast<double>(comp.cells.size());
}

}  // namespace

CaptionOutput caption_head(const Model& m, const TokenFeatureGrid& feats) {
    struct Hit {
        int id;
        double score;
    };
    std::vector<Hit> hits;
    for (int c = 0; c < m.categories().size(); ++c) {
        const auto sims = similarity_map(m, feats, c);
        const double best = *std::max_element(sims.begin(), sims.end());
        if (best >= m.config().theta_cap) hits.push_back({c, best});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.score > b.score; });

    CaptionOutput out;
    out.text = "a scene";
    for (std::size_t k = 0; k < hits.size(); ++k) {
        out.categories.push_back(hits[k].id);
        out.scores.push_back(hits[k].score);
        out.text += (k == 0 ? " with " : ", ") + m.categories().at(hits[k].id).name;
    }
    return out;
}

std::vector<Detection> detect_head(const Model& m, const TokenFeatureGrid& feats, const GridGeometry& g) {
    std::vector<Detection> out;
    for (int c = 0; c < m.categories().size(); ++c) {
        const auto sims = similarity_map(m, feats, c);
        for (const auto& comp : connected_components(threshold(sims, feats.rows, feats.cols, m.config().theta_det))) {
            out.push_back({tokens_to_box(comp.rect, g), c, component_mean(comp, sims, feats.cols)});
        }
    }
    return out;
}

int region_head(const Model& m, const TokenFeatureGrid& feats, const BBox& box, const GridGeometry& g) {
    const auto pooled = mean_pool(feats, box_to_tokens(box, g));
    int best = 0;
    double best_sim = -2.0;
    for (int c = 0; c < m.categories().size(); ++c) {
        const double s = cosine_or_zero(pooled, m.categories().embedding(c));
        if (s > best_sim) {
            best_sim = s;
            best = c;
        }
    }
    return best;
}

std::optional<BBox> localize_head(const Model& m, const TokenFeatureGrid& feats, int category, const GridGeometry& g) {
    if (category < 0 || category >= m.categories().size()) {
        throw ModelError("localize: unknown category id " + std::to_string(category));
    }
    const auto sims = similarity_map(m, feats, category);
    const auto comps = connected_components(threshold(sims, feats.rows, feats.cols, m.config().theta_locmap));
    if (comps.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_mean = component_mean(comps[0], sims, feats.cols);
    for (std::size_t k = 1; k < comps.size(); ++k) {
        const double s = component_mean(comps[k], sims, feats.cols);
        if (s > best_mean) {
            best_mean = s;
            best = k;
        }
    }
    return tokens_to_box(comps[best].rect, g);
}

TaskOutputs run_heads(const Model& m, const TokenFeatureGrid& feats, const GridGeometry& g, const BBox& region,
                      int localize_category) {
    TaskOutputs out;
    out.caption = caption_head(m, feats);
    out.detections = detect_head(m, feats, g);
    out.region_label = region_head(m, feats, region, g);
    out.loc_box = localize_head(m, feats, localize_category, g);
    return out;
}

}  // namespace craft
