#include "craft/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "craft/random.hpp"

namespace craft {

std::string to_string(NegativeStrategy s) {
    switch (s) {
        case NegativeStrategy::None: return "none";
        case NegativeStrategy::SourceOnly: return "source";
        case NegativeStrategy::AllOthers: return "all";
    }
    return "?";
}

std::string to_string(NegativeAggregation a) { return a == NegativeAggregation::Mean ? "mean" : "max"; }
std::string to_string(BoxSource b) { return b == BoxSource::GroundTruth ? "gt" : "det"; }
std::string to_string(StepDirection d) { return d == StepDirection::Descend ? "descend" : "ascend"; }

std::string to_string(TlmTask t) {
    switch (t) {
        case TlmTask::IC: return "ic";
        case TlmTask::OD: return "od";
        case TlmTask::RC: return "rc";
        case TlmTask::OL: return "ol";
    }
    return "?";
}

void AttackConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("attack config: epsilon must be in (0, 1]");
    if (!(alpha >= 0.0 && alpha <= epsilon)) throw std::invalid_argument("attack config: alpha must be in [0, epsilon]");
    if (iterations < 1) throw std::invalid_argument("attack config: iterations must be >= 1");
    if (!(tau >= 0.0 && tau <= 2.0)) throw std::invalid_argument("attack config: tau must be in [0, 2]");
}

nlohmann::ordered_json to_json(const AttackConfig& cfg) {
    return {{"epsilon", cfg.epsilon},
            {"alpha", cfg.alpha},
            {"iterations", cfg.iterations},
            {"tau", cfg.tau},
            {"negatives", to_string(cfg.negatives)},
            {"aggregation", to_string(cfg.aggregation)},
            {"use_rtl", cfg.use_rtl},
            {"box_source", to_string(cfg.box_source)},
            {"direction", to_string(cfg.direction)},
            {"suppression_margin", cfg.suppression_margin},
            {"seed", cfg.seed}};
}

AttackConfig attack_config_from_json(const nlohmann::json& j) {
    AttackConfig cfg;
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.tau = j.value("tau", cfg.tau);
    const auto neg = j.value("negatives", std::string("all"));
    cfg.negatives = neg == "none" ? NegativeStrategy::None
                    : neg == "source" ? NegativeStrategy::SourceOnly
                                      : NegativeStrategy::AllOthers;
    cfg.aggregation = j.value("aggregation", std::string("mean")) == "max" ? NegativeAggregation::Max
                                                                          : NegativeAggregation::Mean;
    cfg.use_rtl = j.value("use_rtl", cfg.use_rtl);
    cfg.box_source = j.value("box_source", std::string("gt")) == "det" ? BoxSource::CleanDetection : BoxSource::GroundTruth;
    cfg.direction = j.value("direction", std::string("descend")) == "ascend" ? StepDirection::Ascend
                                                                            : StepDirection::Descend;
    cfg.suppression_margin = j.value("suppression_margin", cfg.suppression_margin);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.validate();
    return cfg;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// cos(f, e); when out is non-empty, adds scale * dcos/df into it. Zero-norm f gives 0 and no gradient.
double cos_grad(std::span<const double> f, std::span<const double> e, double scale, std::span<double> out) {
    const double nf = norm(f);
    const double ne = norm(e);
    if (nf == 0.0 || ne == 0.0) return 0.0;
    const double c = dot(f, e) / (nf * ne);
    if (!out.empty() && scale != 0.0) {
        const double a = scale / (nf * ne);
        const double b = scale * c / (nf * nf);
        for (std::size_t k = 0; k < f.size(); ++k) out[k] += a * e[k] - b * f[k];
    }
    return c;
}

BoolGrid rect_mask(const TokenRect& r, int rows, int cols) {
    BoolGrid g(rows, cols);
    for (int j = r.j_min; j < std::min(r.j_max, rows); ++j) {
        for (int i = r.i_min; i < std::min(r.i_max, cols); ++i) g.set(j, i);
    }
    return g;
}

/// Spreads dL/dpooled evenly over the region's tokens.
void scatter_pooled(const TokenRect& r, std::span<const double> dpooled, TokenFeatureGrid& grad) {
    const double inv = 1.0 / r.cell_count();
    for (int j = r.j_min; j < r.j_max; ++j) {
        for (int i = r.i_min; i < r.i_max; ++i) {
            auto g = grad.at(i, j);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += inv * dpooled[k];
        }
    }
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

void check_region(const TokenRect& r, const TokenFeatureGrid& f) {
    if (r.i_min < 0 || r.j_min < 0 || r.i_max > f.cols || r.j_max > f.rows || r.cell_count() <= 0) {
        throw std::invalid_argument("loss region outside the token grid");
    }
}

}  // namespace

double contrastive_loss(std::span<const double> pooled, std::span<const double> positive,
                        const std::vector<std::span<const double>>& negatives, double tau,
                        NegativeAggregation aggregation) {
    if (norm(pooled) == 0.0 || norm(positive) == 0.0) throw std::invalid_argument("contrastive_loss: zero-norm vector");
    double agg = 0.0;
    if (!negatives.empty()) {
        agg = aggregation == NegativeAggregation::Mean ? 0.0 : -2.0;
        for (const auto& n : negatives) {
            if (norm(n) == 0.0) throw std::invalid_argument("contrastive_loss: zero-norm negative");
            const double s = cos_grad(pooled, n, 0.0, {});
            agg = aggregation == NegativeAggregation::Mean ? agg + s : std::max(agg, s);
        }
        if (aggregation == NegativeAggregation::Mean) agg /= static_cast<double>(negatives.size());
    }
    return std::max(0.0, agg - cos_grad(pooled, positive, 0.0, {}) + tau);
}

ContrastiveRegionLoss::ContrastiveRegionLoss(TokenRect region, std::vector<double> positive,
                                             std::vector<std::vector<double>> negatives, double tau,
                                             NegativeAggregation aggregation)
    : region_(region), positive_(std::move(positive)), negatives_(std::move(negatives)), tau_(tau),
      aggregation_(aggregation) {}

BoolGrid ContrastiveRegionLoss::support(int rows, int cols) const { return rect_mask(region_, rows, cols); }

double ContrastiveRegionLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    check_region(region_, feats);
    const auto pooled = mean_pool(feats, region_);
    if (norm(pooled) == 0.0) throw std::invalid_argument("contrastive loss: pooled region feature has zero norm");

    double agg = 0.0;
    std::size_t argmax = 0;
    if (!negatives_.empty()) {
        if (aggregation_ == NegativeAggregation::Mean) {
            for (const auto& n : negatives_) agg += cos_grad(pooled, n, 0.0, {});
            agg /= static_cast<double>(negatives_.size());
        } else {
            agg = -2.0;
            for (std::size_t k = 0; k < negatives_.size(); ++k) {
                const double s = cos_grad(pooled, negatives_[k], 0.0, {});
                if (s > agg) {
                    agg = s;
                    argmax = k;
                }
            }
        }
    }
    const double margin = agg - cos_grad(pooled, positive_, 0.0, {}) + tau_;
    if (margin <= 0.0) return 0.0;
    if (grad != nullptr) {
        std::vector<double> dp(pooled.size(), 0.0);
        cos_grad(pooled, positive_, -1.0, dp);
        if (!negatives_.empty()) {
            if (aggregation_ == NegativeAggregation::Mean) {
                const double w = 1.0 / static_cast<double>(negatives_.size());
                for (const auto& n : negatives_) cos_grad(pooled, n, w, dp);
            } else {
                cos_grad(pooled, negatives_[argmax], 1.0, dp);
            }
        }
        scatter_pooled(region_, dp, *grad);
    }
    return margin;
}

GlobalTextMatchLoss::GlobalTextMatchLoss(std::vector<double> target) : target_(std::move(target)) {}

double GlobalTextMatchLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    const TokenRect all{0, feats.cols, 0, feats.rows};
    const auto pooled = mean_pool(feats, all);
    std::vector<double> dp(pooled.size(), 0.0);
    const double s = cos_grad(pooled, target_, grad ? -1.0 : 0.0, grad ? std::span<double>(dp) : std::span<double>());
    if (grad != nullptr) scatter_pooled(all, dp, *grad);
    return -s;
}

FeatureMatchLoss::FeatureMatchLoss(std::vector<double> reference_mean) : reference_(std::move(reference_mean)) {}

double FeatureMatchLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    const TokenRect all{0, feats.cols, 0, feats.rows};
    const auto pooled = mean_pool(feats, all);
    if (pooled.size() != reference_.size()) throw std::invalid_argument("feature match: dimension mismatch");
    std::vector<double> dp(pooled.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < pooled.size(); ++k) {
        const double diff = pooled[k] - reference_[k];
        loss += diff * diff;
        dp[k] = 2.0 * diff;
    }
    if (grad != nullptr) scatter_pooled(all, dp, *grad);
    return loss;
}

TlmCaptionLoss::TlmCaptionLoss(std::vector<double> source, std::vector<double> target)
    : source_(std::move(source)), target_(std::move(target)) {}

double TlmCaptionLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    double best_t = -2.0, best_s = -2.0;
    int ti = 0, tj = 0, si = 0, sj = 0;
    for (int j = 0; j < feats.rows; ++j) {
        for (int i = 0; i < feats.cols; ++i) {
            const double ct = cos_grad(feats.at(i, j), target_, 0.0, {});
            const double cs = cos_grad(feats.at(i, j), source_, 0.0, {});
            if (ct > best_t) {
                best_t = ct;
                ti = i;
                tj = j;
            }
            if (cs > best_s) {
                best_s = cs;
                si = i;
                sj = j;
            }
        }
    }
    if (grad != nullptr) {
        cos_grad(feats.at(ti, tj), target_, -1.0, grad->at(ti, tj));
        cos_grad(feats.at(si, sj), source_, 1.0, grad->at(si, sj));
    }
    return -best_t + best_s;
}

TlmRegionLoss::TlmRegionLoss(TokenRect region, int target, std::vector<std::vector<double>> embeddings)
    : region_(region), target_(target), embeddings_(std::move(embeddings)) {}

TlmRegionLoss::TlmRegionLoss(TokenRect region, int target, std::vector<std::vector<double>> embeddings, int suppress,
                             double floor)
    : region_(region), target_(target), embeddings_(std::move(embeddings)), suppress_(suppress), floor_(floor) {}

BoolGrid TlmRegionLoss::support(int rows, int cols) const { return rect_mask(region_, rows, cols); }

double TlmRegionLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    check_region(region_, feats);
    const auto pooled = mean_pool(feats, region_);
    const auto t = static_cast<std::size_t>(target_);
    double best_other = -2.0;
    std::size_t other = 0;
    for (std::size_t c = 0; c < embeddings_.size(); ++c) {
        if (c == t) continue;
        const double s = cos_grad(pooled, embeddings_[c], 0.0, {});
        if (s > best_other) {
            best_other = s;
            other = c;
        }
    }
    double loss = -cos_grad(pooled, embeddings_[t], 0.0, {}) + best_other;
    if (grad != nullptr) {
        std::vector<double> dp(pooled.size(), 0.0);
        cos_grad(pooled, embeddings_[t], -1.0, dp);
        cos_grad(pooled, embeddings_[other], 1.0, dp);
        scatter_pooled(region_, dp, *grad);
    }
    if (suppress_ >= 0) {
        const auto& src = embeddings_[static_cast<std::size_t>(suppress_)];
        const double inv = 1.0 / region_.cell_count();
        for (int j = region_.j_min; j < region_.j_max; ++j) {
            for (int i = region_.i_min; i < region_.i_max; ++i) {
                const double s = cos_grad(feats.at(i, j), src, 0.0, {});
                if (s <= floor_) continue;
                loss += inv * (s - floor_);
                if (grad != nullptr) cos_grad(feats.at(i, j), src, inv, grad->at(i, j));
            }
        }
    }
    return loss;
}

TlmLocalizationLoss::TlmLocalizationLoss(TokenRect region, std::vector<double> target)
    : region_(region), target_(std::move(target)) {}

double TlmLocalizationLoss::evaluate(const TokenFeatureGrid& feats, TokenFeatureGrid* grad) const {
    check_region(region_, feats);
    const double inv = 1.0 / region_.cell_count();
    double inside = 0.0;
    double best_out = -2.0;
    int oi = -1, oj = -1;
    for (int j = 0; j < feats.rows; ++j) {
        for (int i = 0; i < feats.cols; ++i) {
            if (region_.contains(i, j)) {
                inside += cos_grad(feats.at(i, j), target_, grad ? -inv : 0.0,
                                   grad ? grad->at(i, j) : std::span<double>());
            } else {
                const double s = cos_grad(feats.at(i, j), target_, 0.0, {});
                if (s > best_out) {
                    best_out = s;
                    oi = i;
                    oj = j;
                }
            }
        }
    }
    double loss = -inside * inv;
    if (oi >= 0) {
        loss += best_out;
        if (grad != nullptr) cos_grad(feats.at(oi, oj), target_, 1.0, grad->at(oi, oj));
    }
    return loss;
}

AttackResult run_pgd(const Model& model, const Image& clean, const FeatureLoss& loss, const AttackConfig& cfg,
                     const IterationObserver& observer) {
    cfg.validate();
    if (!clean.in_unit_range()) throw std::invalid_argument("run_pgd: clean image has pixels outside [0,1]");
    AttackResult r;
    r.adversarial = clean;
    r.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));
    const double sign_dir = cfg.direction == StepDirection::Descend ? -1.0 : 1.0;
    auto adv = r.adversarial.pixels();
    const auto ref = clean.pixels();
    for (int t = 0; t < cfg.iterations; ++t) {
        const LossGradient lg = model.loss_and_gradient(r.adversarial, loss);
        r.loss_trace.push_back(lg.loss);
        const auto g = lg.gradient.pixels();
        for (std::size_t k = 0; k < adv.size(); ++k) {
            if (g[k] == 0.0) continue;
            const double step = g[k] > 0.0 ? cfg.alpha : -cfg.alpha;
            double v = adv[k] + sign_dir * step;
            v = std::clamp(v, ref[k] - cfg.epsilon, ref[k] + cfg.epsilon);
            // ref +- eps rounds; step inward until the stored difference is within eps.
            while (v - ref[k] > cfg.epsilon) v = std::nextafter(v, ref[k]);
            while (ref[k] - v > cfg.epsilon) v = std::nextafter(v, ref[k]);
            adv[k] = std::clamp(v, 0.0, 1.0);
        }
        ++r.iterations;
        if (observer) observer(t + 1, r.adversarial);
    }
    r.perturbation = Image(clean.height(), clean.width(), clean.channels());
    auto d = r.perturbation.pixels();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = adv[k] - ref[k];
    return r;
}

namespace {

struct RegionSims {
    double target;
    double negatives;
};

RegionSims region_sims(const Model& model, const Image& img, const TokenRect& region, int target) {
    const auto pooled = mean_pool(model.encode(img), region);
    RegionSims s{cosine_or_zero(pooled, model.categories().embedding(target)), 0.0};
    int n = 0;
    for (int c = 0; c < model.categories().size(); ++c) {
        if (c == target) continue;
        s.negatives += cosine_or_zero(pooled, model.categories().embedding(c));
        ++n;
    }
    if (n > 0) s.negatives /= n;
    return s;
}

void finish(AttackResult& r, const Model& model, const Image& clean, const TokenRect& region, int target,
            std::string method) {
    r.method = std::move(method);
    r.region = region;
    r.initial_target_sim = region_sims(model, clean, region, target).target;
    const auto fin = region_sims(model, r.adversarial, region, target);
    r.final_target_sim = fin.target;
    r.final_negative_sim = fin.negatives;
}

TokenRect gt_region(const Model& model, const Sample& sample) {
    return box_to_tokens(sample.bbox, model.geometry(sample.width, sample.height));
}

std::vector<std::vector<double>> all_embeddings(const Model& model) {
    std::vector<std::vector<double>> out;
    for (int c = 0; c < model.categories().size(); ++c) out.push_back(to_vec(model.categories().embedding(c)));
    return out;
}

}  // namespace

BBox attack_box(const Model& model, const Image& clean, const Sample& sample, BoxSource source) {
    if (source == BoxSource::GroundTruth) return sample.bbox;
    const int src = model.categories().require(sample.source);
    const auto dets = detect_head(model, model.encode(clean), model.geometry(sample.width, sample.height));
    const Detection* best = nullptr;
    for (const auto& d : dets) {
        if (d.category == src && (best == nullptr || d.score > best->score)) best = &d;
    }
    return best != nullptr ? best->box : sample.bbox;
}

TokenRect craft_region(const Model& model, const Image& clean, const Sample& sample, const AttackConfig& cfg) {
    if (!cfg.use_rtl) return model.canonical_geometry().full_grid();
    return box_to_tokens(attack_box(model, clean, sample, cfg.box_source), model.geometry(sample.width, sample.height));
}

std::unique_ptr<FeatureLoss> make_craft_loss(const Model& model, const Sample& sample, const TokenRect& region,
                                             const AttackConfig& cfg) {
    const auto& table = model.categories();
    const int target = table.require(sample.target);
    const int source = table.require(sample.source);
    std::vector<std::vector<double>> negs;
    switch (cfg.negatives) {
        case NegativeStrategy::None: break;
        case NegativeStrategy::SourceOnly: negs.push_back(to_vec(table.embedding(source))); break;
        case NegativeStrategy::AllOthers:
            for (int c = 0; c < table.size(); ++c) {
                if (c != target) negs.push_back(to_vec(table.embedding(c)));
            }
            break;
    }
    return std::make_unique<ContrastiveRegionLoss>(region, to_vec(table.embedding(target)), std::move(negs), cfg.tau,
                                                   cfg.aggregation);
}

std::unique_ptr<FeatureLoss> make_tlm_loss(const Model& model, const Sample& sample, TlmTask task,
                                           const AttackConfig& cfg) {
    const auto& table = model.categories();
    const int target = table.require(sample.target);
    const int source = table.require(sample.source);
    const TokenRect region = gt_region(model, sample);
    switch (task) {
        case TlmTask::IC:
            return std::make_unique<TlmCaptionLoss>(to_vec(table.embedding(source)), to_vec(table.embedding(target)));
        case TlmTask::RC: return std::make_unique<TlmRegionLoss>(region, target, all_embeddings(model));
        case TlmTask::OD:
            return std::make_unique<TlmRegionLoss>(region, target, all_embeddings(model), source,
                                                   model.config().theta_det - cfg.suppression_margin);
        case TlmTask::OL: return std::make_unique<TlmLocalizationLoss>(region, to_vec(table.embedding(target)));
    }
    throw std::invalid_argument("unknown TLM task");
}

AttackResult craft_attack(const Model& model, const Image& img, const Sample& sample, const AttackConfig& cfg,
                          const IterationObserver& observer) {
    const TokenRect region = craft_region(model, img, sample, cfg);
    const auto loss = make_craft_loss(model, sample, region, cfg);
    AttackResult r = run_pgd(model, img, *loss, cfg, observer);
    finish(r, model, img, region, model.categories().require(sample.target), "craft");
    return r;
}

AttackResult feature_match_text_attack(const Model& model, const Image& img, const Sample& sample,
                                       const AttackConfig& cfg, const IterationObserver& observer) {
    const int target = model.categories().require(sample.target);
    const GlobalTextMatchLoss loss(to_vec(model.categories().embedding(target)));
    AttackResult r = run_pgd(model, img, loss, cfg, observer);
    finish(r, model, img, model.canonical_geometry().full_grid(), target, "mfit");
    return r;
}

AttackResult feature_match_image_attack(const Model& model, const Image& img, const Sample& sample,
                                        const Image& target_img, const AttackConfig& cfg,
                                        const IterationObserver& observer) {
    const int target = model.categories().require(sample.target);
    const auto full = model.canonical_geometry().full_grid();
    const FeatureMatchLoss loss(mean_pool(model.encode(target_img), full));
    AttackResult r = run_pgd(model, img, loss, cfg, observer);
    finish(r, model, img, full, target, "mfii");
    return r;
}

AttackResult tlm_attack(const Model& model, const Image& img, const Sample& sample, TlmTask task,
                        const AttackConfig& cfg, const IterationObserver& observer) {
    const auto loss = make_tlm_loss(model, sample, task, cfg);
    AttackResult r = run_pgd(model, img, *loss, cfg, observer);
    finish(r, model, img, gt_region(model, sample), model.categories().require(sample.target), "tlm-" + to_string(task));
    return r;
}

Image target_reference_image(const Model& model, const Sample& sample, const GeneratorConfig& gen) {
    const ChangePair swapped{sample.target, sample.source, ""};
    return synthesize_scene(swapped, model, gen, derive_seed(sample.seed, 0x7461726765747265ull)).image;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::None: return "none";
        case Method::Craft: return "craft";
        case Method::MfIt: return "mfit";
        case Method::MfIi: return "mfii";
        case Method::TlmIc: return "tlm-ic";
        case Method::TlmOd: return "tlm-od";
        case Method::TlmRc: return "tlm-rc";
        case Method::TlmOl: return "tlm-ol";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : {Method::None, Method::Craft, Method::MfIt, Method::MfIi, Method::TlmIc, Method::TlmOd,
                     Method::TlmRc, Method::TlmOl}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

AttackResult run_attack(Method method, const Model& model, const Image& img, const Sample& sample,
                        const GeneratorConfig& gen, const AttackConfig& cfg, const IterationObserver& observer) {
    switch (method) {
        case Method::None: {
            cfg.validate();
            AttackResult r;
            r.adversarial = img;
            r.perturbation = Image(img.height(), img.width(), img.channels());
            finish(r, model, img, gt_region(model, sample), model.categories().require(sample.target), "none");
            return r;
        }
        case Method::Craft: return craft_attack(model, img, sample, cfg, observer);
        case Method::MfIt: return feature_match_text_attack(model, img, sample, cfg, observer);
        case Method::MfIi:
            return feature_match_image_attack(model, img, sample, target_reference_image(model, sample, gen), cfg,
                                              observer);
        case Method::TlmIc: return tlm_attack(model, img, sample, TlmTask::IC, cfg, observer);
        case Method::TlmOd: return tlm_attack(model, img, sample, TlmTask::OD, cfg, observer);
        case Method::TlmRc: return tlm_attack(model, img, sample, TlmTask::RC, cfg, observer);
        case Method::TlmOl: return tlm_attack(model, img, sample, TlmTask::OL, cfg, observer);
    }
    throw std::invalid_argument("unknown attack method");
}

}  // namespace craft
