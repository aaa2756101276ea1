#include "craft/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "craft/parallel.hpp"
#include "craft/random.hpp"

namespace craft {

void EvalConfig::validate() const {
    if (!(theta_box > 0.0 && theta_box < 1.0) || !(theta_loc > 0.0 && theta_loc < 1.0)) {
        throw std::invalid_argument("eval config: IoU thresholds must lie in (0, 1)");
    }
}

nlohmann::ordered_json to_json(const EvalConfig& cfg) {
    return {{"theta_box", cfg.theta_box}, {"theta_loc", cfg.theta_loc}};
}

bool success_caption(const CaptionOutput& caption, int source, int target) {
    const auto& ids = caption.categories;
    return std::find(ids.begin(), ids.end(), target) != ids.end() &&
           std::find(ids.begin(), ids.end(), source) == ids.end();
}

bool success_detection(const std::vector<Detection>& detections, const BBox& source_box, int /*source*/, int target,
                       double theta_box) {
    return std::any_of(detections.begin(), detections.end(), [&](const Detection& d) {
        return d.category == target && iou(d.box, source_box) > theta_box;
    });
}

bool success_region(int label, int target) { return label == target; }

bool success_localization(const std::optional<BBox>& loc_box, const BBox& source_box, double theta_loc) {
    return loc_box.has_value() && iou(*loc_box, source_box) > theta_loc;
}

SuccessVector evaluate_sample(const Model& model, const Image& adv, const Sample& sample, const EvalConfig& cfg) {
    cfg.validate();
    const int source = model.categories().require(sample.source);
    const int target = model.categories().require(sample.target);
    const GridGeometry g = model.geometry(sample.width, sample.height);
    const TokenFeatureGrid feats = model.encode(adv);
    const TaskOutputs out = run_heads(model, feats, g, sample.bbox, target);
    return {success_caption(out.caption, source, target),
            success_detection(out.detections, sample.bbox, source, target, cfg.theta_box),
            success_region(out.region_label, target), success_localization(out.loc_box, sample.bbox, cfg.theta_loc)};
}

MetricsReport compute_metrics(std::span<const SuccessVector> vectors, std::span<const SampleTag> tags,
                              const std::vector<std::string>& heatmap_labels) {
    if (vectors.empty()) throw std::invalid_argument("compute_metrics: no success vectors");
    if (!tags.empty() && tags.size() != vectors.size()) {
        throw std::invalid_argument("compute_metrics: tag count does not match vector count");
    }
    MetricsReport r;
    r.n = static_cast<int>(vectors.size());
    int cap = 0, det = 0, reg = 0, loc = 0, four = 0, three = 0;
    for (const auto& v : vectors) {
        cap += v.cap;
        det += v.det;
        reg += v.reg;
        loc += v.loc;
        four += v.all();
        three += v.count() >= 3;
    }
    const double n = r.n;
    r.ic = cap / n;
    r.od = det / n;
    r.rc = reg / n;
    r.ol = loc / n;
    r.avg = (r.ic + r.od + r.rc + r.ol) / 4.0;
    r.ctsr4 = four / n;
    r.ctsr3 = three / n;

    if (tags.empty()) return r;

    for (std::size_t k = 0; k < vectors.size(); ++k) {
        auto it = std::find_if(r.per_pair.begin(), r.per_pair.end(), [&](const PairStats& p) {
            return p.source == tags[k].source && p.target == tags[k].target;
        });
        if (it == r.per_pair.end()) {
            r.per_pair.push_back({tags[k].source, tags[k].target, 0, 0, 0.0});
            it = std::prev(r.per_pair.end());
        }
        ++it->n;
        it->all_four += vectors[k].all();
    }
    for (auto& p : r.per_pair) p.ctsr4 = static_cast<double>(p.all_four) / p.n;

    r.heatmap.labels = heatmap_labels;
    if (r.heatmap.labels.empty()) {
        for (const auto& t : tags) {
            for (const auto* s : {&t.source_super, &t.target_super}) {
                if (std::find(r.heatmap.labels.begin(), r.heatmap.labels.end(), *s) == r.heatmap.labels.end()) {
                    r.heatmap.labels.push_back(*s);
                }
            }
        }
    }
    const std::size_t m = r.heatmap.labels.size();
    auto index_of = [&](const std::string& s) -> std::size_t {
        const auto it = std::find(r.heatmap.labels.begin(), r.heatmap.labels.end(), s);
        if (it == r.heatmap.labels.end()) throw std::invalid_argument("compute_metrics: unknown supercategory " + s);
        return static_cast<std::size_t>(it - r.heatmap.labels.begin());
    };
    std::vector<int> hits(m * m, 0), counts(m * m, 0);
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        const std::size_t cell = index_of(tags[k].source_super) * m + index_of(tags[k].target_super);
        ++counts[cell];
        hits[cell] += vectors[k].all();
    }
    r.heatmap.matrix.assign(m * m, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < m * m; ++c) {
        if (counts[c] > 0) r.heatmap.matrix[c] = static_cast<double>(hits[c]) / counts[c];
    }
    return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["rates"] = {{"ic", r.ic}, {"od", r.od}, {"rc", r.rc}, {"ol", r.ol}};
    j["avg"] = r.avg;
    j["ctsr4"] = r.ctsr4;
    j["ctsr3"] = r.ctsr3;
    auto& pp = j["per_pair"] = nlohmann::ordered_json::array();
    for (const auto& p : r.per_pair) {
        pp.push_back({{"source", p.source}, {"target", p.target}, {"n", p.n}, {"ctsr4", p.ctsr4}});
    }
    nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
    const std::size_t m = r.heatmap.labels.size();
    for (std::size_t i = 0; i < m; ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < m; ++k) {
            const double v = r.heatmap.matrix[i * m + k];
            if (std::isnan(v)) {
                row.push_back(nullptr);
            } else {
                row.push_back(v);
            }
        }
        matrix.push_back(std::move(row));
    }
    j["heatmap"] = {{"labels", r.heatmap.labels}, {"matrix", std::move(matrix)}};
    return j;
}

namespace {

std::string fixed(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string metric_columns(const MetricsReport& r) {
    return std::to_string(r.n) + "," + fixed(r.ic) + "," + fixed(r.od) + "," + fixed(r.rc) + "," + fixed(r.ol) + "," +
           fixed(r.avg) + "," + fixed(r.ctsr4) + "," + fixed(r.ctsr3);
}

constexpr const char* kMetricHeader = "n,ic,od,rc,ol,avg,ctsr4,ctsr3";

}  // namespace

std::string heatmap_csv(const MetricsReport& r) {
    const std::size_t m = r.heatmap.labels.size();
    std::string out = "source\\target";
    for (const auto& l : r.heatmap.labels) out += "," + csv_field(l);
    out += "\n";
    for (std::size_t i = 0; i < m; ++i) {
        out += csv_field(r.heatmap.labels[i]);
        for (std::size_t k = 0; k < m; ++k) out += "," + fixed(r.heatmap.matrix[i * m + k]);
        out += "\n";
    }
    return out;
}

std::string format_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %7s %7s %7s %7s %7s %7s %7s\n", "Method", "IC", "OD", "RC", "OL", "avg",
                  "CTSR-4", "CTSR-3");
    out += buf;
    for (const auto& [name, r] : rows) {
        std::snprintf(buf, sizeof buf, "%-24s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f\n", name.c_str(), r.ic, r.od,
                      r.rc, r.ol, r.avg, r.ctsr4, r.ctsr3);
        out += buf;
    }
    return out;
}

std::vector<SampleTag> sample_tags(const Dataset& ds, const Model& model) {
    std::vector<SampleTag> tags;
    tags.reserve(ds.samples.size());
    auto super_of = [&](const std::string& name) {
        return model.categories().at(model.categories().require(name)).supercategory;
    };
    for (const auto& s : ds.samples) {
        const ChangePair* p = find_pair(ds.pairs, s.source, s.target);
        tags.push_back({s.source, s.target, p ? p->supercategory : super_of(s.source), super_of(s.target)});
    }
    return tags;
}

BatchRun attack_and_evaluate(const Model& model, const Dataset& ds, Method method, const AttackConfig& cfg,
                             const EvalConfig& eval, int jobs, const BatchObserver& observer, bool keep_results) {
    cfg.validate();
    eval.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = ds.samples.size();
    BatchRun run;
    run.success.resize(n);
    if (keep_results) run.results.resize(n);
    parallel_for(n, jobs, [&](std::size_t k) {
        IterationObserver obs;
        if (observer) obs = [&observer, k](int it, const Image& adv) { observer(k, it, adv); };
        AttackResult r = run_attack(method, model, ds.images[k], ds.samples[k], ds.generator, cfg, obs);
        run.success[k] = evaluate_sample(model, r.adversarial, ds.samples[k], eval);
        if (keep_results) run.results[k] = std::move(r);
    });
    const auto tags = sample_tags(ds, model);
    run.report = compute_metrics(run.success, tags, supercategories(ds.pairs));
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

std::vector<SweepCell> run_sweep(const Model& model, const Dataset& ds, const AttackConfig& base,
                                 const std::vector<double>& epsilons, const std::vector<int>& iterations,
                                 const EvalConfig& eval, int jobs) {
    if (epsilons.empty() || iterations.empty()) throw std::invalid_argument("run_sweep: empty grid");
    std::vector<SweepCell> cells;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        for (std::size_t t = 0; t < iterations.size(); ++t) {
            AttackConfig cfg = base;
            cfg.epsilon = epsilons[e];
            cfg.alpha = epsilons[e] / 4.0;
            cfg.iterations = iterations[t];
            cfg.seed = derive_seed(base.seed, e, t);
            BatchRun run = attack_and_evaluate(model, ds, Method::Craft, cfg, eval, jobs, {}, false);
            cells.push_back({cfg.epsilon, cfg.alpha, cfg.iterations, cfg.seed, std::move(run.report), run.seconds});
        }
    }
    return cells;
}

std::vector<AblationCell> run_ablation(const Model& model, const Dataset& ds, const AttackConfig& base,
                                       const EvalConfig& eval, int jobs) {
    std::vector<AblationCell> cells;
    for (bool rtl : {false, true}) {
        for (NegativeStrategy neg : {NegativeStrategy::None, NegativeStrategy::SourceOnly, NegativeStrategy::AllOthers}) {
            AttackConfig cfg = base;
            cfg.use_rtl = rtl;
            cfg.negatives = neg;
            BatchRun run = attack_and_evaluate(model, ds, Method::Craft, cfg, eval, jobs, {}, false);
            cells.push_back({rtl, neg, std::move(run.report), run.seconds});
        }
    }
    return cells;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string out = std::string("eps,alpha,iters,") + kMetricHeader + "\n";
    for (const auto& c : cells) {
        out += fixed(c.epsilon) + "," + fixed(c.alpha) + "," + std::to_string(c.iterations) + "," +
               metric_columns(c.report) + "\n";
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
    std::string out = std::string("rtl,neg_strategy,") + kMetricHeader + "\n";
    for (const auto& c : cells) {
        out += std::string(c.use_rtl ? "on" : "off") + "," + to_string(c.negatives) + "," + metric_columns(c.report) +
               "\n";
    }
    return out;
}

}  // namespace craft
