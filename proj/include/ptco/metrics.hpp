#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/change_pair.hpp"
#include "ptco/errors.hpp"
#include "ptco/identify.hpp"
#include "ptco/update.hpp"

namespace ptco {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

// Undefined ratios (0/0) stay absent rather than collapsing to 0.
struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> precision_pos, recall_pos, f1_pos;
    std::optional<double> precision_neg, recall_neg, f1_neg;
    std::optional<double> csr, tps, ucr;
    std::optional<double> two_phase_accuracy;
};

namespace detail {

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline std::optional<double> f1(std::optional<double> precision, std::optional<double> recall) {
    if (!precision || !recall) return std::nullopt;
    double sum = *precision + *recall;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / sum;
}

}  // namespace detail

inline MetricsReport classification_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw EmptyCounts("confusion counts are all zero");
    MetricsReport m;
    m.accuracy = detail::ratio(c.tp + c.tn, c.total());
    m.precision_pos = detail::ratio(c.tp, c.tp + c.fp);
    m.recall_pos = detail::ratio(c.tp, c.tp + c.fn);
    m.f1_pos = detail::f1(m.precision_pos, m.recall_pos);
    m.precision_neg = detail::ratio(c.tn, c.tn + c.fn);
    m.recall_neg = detail::ratio(c.tn, c.tn + c.fp);
    m.f1_neg = detail::f1(m.precision_neg, m.recall_neg);
    return m;
}

// Cumulative gates over a session set: CSR counts sessions whose best
// iteration compiled, TPS those whose best passed, UCR those that satisfied
// everything.
struct UpdateRates {
    std::size_t sessions = 0;
    std::size_t compiled = 0;
    std::size_t passed = 0;
    std::size_t covered = 0;

    std::optional<double> csr() const { return detail::ratio(compiled, sessions); }
    std::optional<double> tps() const { return detail::ratio(passed, sessions); }
    std::optional<double> ucr() const { return detail::ratio(covered, sessions); }
};

inline UpdateRates update_metrics(const std::vector<UpdateSession>& sessions) {
    if (sessions.empty()) throw EmptySessionList("no update sessions to evaluate");
    UpdateRates rates;
    rates.sessions = sessions.size();
    for (const UpdateSession& s : sessions) {
        QualityLevel best = s.best_level();
        if (reached_compile(best)) ++rates.compiled;
        if (reached_test_pass(best)) ++rates.passed;
        if (reached_full(best)) ++rates.covered;
    }
    return rates;
}

// Per-project rows plus the pooled (per-sample) rate over all sessions; the
// pooled row is what headline averages report.
inline std::vector<std::pair<std::string, UpdateRates>> update_metrics_by_project(
    const std::vector<UpdateSession>& sessions) {
    std::map<std::string, std::vector<UpdateSession>> grouped;
    for (const UpdateSession& s : sessions) grouped[s.project].push_back(s);
    std::vector<std::pair<std::string, UpdateRates>> rows;
    for (const auto& [project, list] : grouped) rows.emplace_back(project, update_metrics(list));
    rows.emplace_back("average", update_metrics(sessions));
    return rows;
}

// One identification outcome joined with its ground truth.
struct EvaluatedVerdict {
    std::string sample_id;
    PairLabel truth = PairLabel::UNLABELED;
    Decision decision = Decision::NOT_OBSOLETE;
};

inline ConfusionCounts counts_from_verdicts(const std::vector<EvaluatedVerdict>& verdicts) {
    ConfusionCounts c;
    for (const EvaluatedVerdict& v : verdicts) {
        if (v.truth == PairLabel::UNLABELED) continue;
        bool actual_pos = v.truth == PairLabel::POSITIVE;
        bool predicted_pos = v.decision == Decision::OBSOLETE;
        if (actual_pos && predicted_pos) ++c.tp;
        if (actual_pos && !predicted_pos) ++c.fn;
        if (!actual_pos && predicted_pos) ++c.fp;
        if (!actual_pos && !predicted_pos) ++c.tn;
    }
    return c;
}

// Fraction of ground-truth-positive samples that were both identified as
// obsolete and updated all the way to SATISFIES_ALL.
inline std::optional<double> two_phase_accuracy(const std::vector<EvaluatedVerdict>& verdicts,
                                                const std::vector<UpdateSession>& sessions) {
    std::map<std::string, const UpdateSession*> by_id;
    for (const UpdateSession& s : sessions) by_id[s.sample_id] = &s;

    std::size_t positives = 0;
    std::size_t full_success = 0;
    for (const EvaluatedVerdict& v : verdicts) {
        if (v.truth != PairLabel::POSITIVE) continue;
        ++positives;
        if (v.decision != Decision::OBSOLETE) continue;
        auto it = by_id.find(v.sample_id);
        if (it == by_id.end())
            throw MissingSession("no update session for correctly identified sample " +
                                 v.sample_id);
        if (reached_full(it->second->best_level())) ++full_success;
    }
    return detail::ratio(full_success, positives);
}

inline nlohmann::ordered_json optional_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
    nlohmann::ordered_json j;
    j["accuracy"] = optional_to_json(m.accuracy);
    j["precision_pos"] = optional_to_json(m.precision_pos);
    j["recall_pos"] = optional_to_json(m.recall_pos);
    j["f1_pos"] = optional_to_json(m.f1_pos);
    j["precision_neg"] = optional_to_json(m.precision_neg);
    j["recall_neg"] = optional_to_json(m.recall_neg);
    j["f1_neg"] = optional_to_json(m.f1_neg);
    j["csr"] = optional_to_json(m.csr);
    j["tps"] = optional_to_json(m.tps);
    j["ucr"] = optional_to_json(m.ucr);
    j["two_phase_accuracy"] = optional_to_json(m.two_phase_accuracy);
    return j;
}

// Aligned plain-text cell: percentages with two decimals, em dash when absent.
inline std::string metric_cell(const std::optional<double>& v) {
    if (!v) return "—";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *v * 100.0);
    return buf;
}

inline std::string render_update_table(
    const std::vector<std::pair<std::string, UpdateRates>>& rows) {
    std::size_t name_width = 7;
    for (const auto& [name, rates] : rows) name_width = std::max(name_width, name.size());
    std::string out;
    auto pad = [](std::string s, std::size_t w) {
        while (s.size() < w) s += ' ';
        return s;
    };
    out += pad("project", name_width) + "  " + pad("CSR", 8) + pad("TPS", 8) + pad("UCR", 8) +
           "sessions\n";
    for (const auto& [name, rates] : rows) {
        out += pad(name, name_width) + "  " + pad(metric_cell(rates.csr()), 8) +
               pad(metric_cell(rates.tps()), 8) + pad(metric_cell(rates.ucr()), 8) +
               std::to_string(rates.sessions) + "\n";
    }
    return out;
}

}  // namespace ptco
