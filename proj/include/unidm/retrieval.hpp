#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "unidm/context.hpp"
#include "unidm/datalake.hpp"
#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/rng.hpp"
#include "unidm/taskmodel.hpp"
#include "unidm/text.hpp"

namespace unidm {

struct RetrievalConfig {
    std::size_t sample_size = 50;
    std::size_t top_k = 3;
    std::size_t attr_count = 1;
    std::size_t score_batch_size = 10;
    std::uint64_t seed = 0;
    bool include_target_attribute = true;

    void validate() const {
        if (sample_size == 0 || top_k == 0 || attr_count == 0 || score_batch_size == 0)
            throw Error(ErrorCode::ConfigInvalid, "retrieval sizes must be positive");
        if (top_k > sample_size) throw Error(ErrorCode::ConfigInvalid, "top_k must not exceed sample_size");
    }
};

/// Relevance of one candidate record, clamped to [0, 3].
class RelevanceScore {
public:
    static constexpr int kMin = 0;
    static constexpr int kMax = 3;

    constexpr RelevanceScore() = default;
    constexpr explicit RelevanceScore(long long v) noexcept
        : value_(static_cast<int>(std::clamp<long long>(v, kMin, kMax))) {}

    constexpr int value() const noexcept { return value_; }
    constexpr bool operator==(const RelevanceScore&) const = default;

private:
    int value_ = 0;
};

/// p_rm
inline std::string render_meta_prompt(const TaskDescription& task, const QueryString& query,
                                      const std::vector<std::string>& candidates) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyCandidateSet, "meta-wise retrieval needs candidate attributes");
    return "The task is " + task.text + ". The target query is " + query.text + ". The candidate attributes are [" +
           text::join(candidates, ",") + "]. Which attributes are helpful for the task and the query?";
}

struct AttributeSelection {
    std::vector<std::string> attributes;
    bool fallback_used = false;
};

/// Finds candidate names in the reply: case-insensitive, whole-token, longer
/// names claim their span first so "city" cannot fire inside "city_code".
/// Keeps the first `attr_count` distinct names in reply order; with no hit,
/// falls back to the leading `attr_count` candidates.
inline AttributeSelection parse_attribute_selection(std::string_view reply, const std::vector<std::string>& candidates,
                                                    std::size_t attr_count) {
    const std::string hay = text::to_lower(reply);
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].size() > candidates[b].size(); });

    std::vector<bool> claimed(hay.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> hits;  // (position, candidate)
    for (std::size_t ci : order) {
        const std::string needle = text::to_lower(candidates[ci]);
        if (needle.empty()) continue;
        for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
            std::size_t end = pos + needle.size();
            bool left_ok = pos == 0 || !text::is_word_char(hay[pos - 1]) || !text::is_word_char(needle.front());
            bool right_ok = end == hay.size() || !text::is_word_char(hay[end]) || !text::is_word_char(needle.back());
            if (!left_ok || !right_ok) continue;
            if (std::any_of(claimed.begin() + static_cast<std::ptrdiff_t>(pos),
                            claimed.begin() + static_cast<std::ptrdiff_t>(end), [](bool b) { return b; }))
                continue;
            std::fill(claimed.begin() + static_cast<std::ptrdiff_t>(pos),
                      claimed.begin() + static_cast<std::ptrdiff_t>(end), true);
            hits.emplace_back(pos, ci);
        }
    }
    std::sort(hits.begin(), hits.end());

    AttributeSelection out;
    std::set<std::size_t> taken;
    for (const auto& [pos, ci] : hits) {
        if (out.attributes.size() >= attr_count) break;
        if (taken.insert(ci).second) out.attributes.push_back(candidates[ci]);
    }
    if (out.attributes.empty()) {
        out.fallback_used = true;
        for (std::size_t i = 0; i < std::min(attr_count, candidates.size()); ++i) out.attributes.push_back(candidates[i]);
    }
    return out;
}

/// p_ri over one batch of candidates, numbered from 1.
inline std::string render_instance_prompt(const TaskDescription& task, const QueryString& query,
                                          const std::vector<std::string>& attributes,
                                          const std::vector<Record>& projected) {
    std::string out = "The task is " + task.text + ". The target query is " + query.text +
                      ". To score the relevance (range from 0 to 3) of given instances based on the task and the query:";
    for (std::size_t i = 0; i < projected.size(); ++i) {
        out += '\n';
        out += std::to_string(i + 1);
        out += ": ";
        out += serialize_record(attributes, projected[i]);
    }
    out += "\nAnswer with one line per instance in the form \"i: score\".";
    return out;
}

struct ParsedScores {
    std::vector<RelevanceScore> scores;
    std::size_t defaulted = 0;  // indices absent from the reply
};

/// Reads "i: score" markers anywhere in the reply. The first marker for an
/// index wins; absent indices score 0; out-of-range indices are ignored.
inline ParsedScores parse_scores_detailed(std::string_view reply, std::size_t m) {
    ParsedScores out;
    out.scores.assign(m, RelevanceScore(0));
    std::vector<bool> seen(m, false);

    auto read_uint = [&](std::size_t& i, unsigned long long& v) {
        std::size_t start = i;
        v = 0;
        while (i < reply.size() && reply[i] >= '0' && reply[i] <= '9') {
            if (v < 1'000'000'000ULL) v = v * 10 + static_cast<unsigned long long>(reply[i] - '0');
            ++i;
        }
        return i > start;
    };
    auto skip_blank = [&](std::size_t& i) {
        while (i < reply.size() && (reply[i] == ' ' || reply[i] == '\t')) ++i;
    };

    std::size_t i = 0;
    while (i < reply.size()) {
        bool boundary = i == 0 || !(reply[i - 1] >= '0' && reply[i - 1] <= '9');
        unsigned long long idx = 0;
        std::size_t j = i;
        if (!boundary || !read_uint(j, idx)) {
            ++i;
            continue;
        }
        std::size_t k = j;
        skip_blank(k);
        if (k >= reply.size() || reply[k] != ':') {
            i = j;
            continue;
        }
        ++k;
        skip_blank(k);
        bool negative = false;
        if (k < reply.size() && reply[k] == '-') {
            negative = true;
            ++k;
        }
        unsigned long long value = 0;
        std::size_t after = k;
        if (!read_uint(after, value)) {
            i = k;
            continue;
        }
        if (idx >= 1 && idx <= m && !seen[idx - 1]) {
            seen[idx - 1] = true;
            out.scores[idx - 1] = RelevanceScore(negative ? -static_cast<long long>(value) : static_cast<long long>(value));
        }
        i = after;
    }
    out.defaulted = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), false));
    return out;
}

inline std::vector<RelevanceScore> parse_scores(std::string_view reply, std::size_t m) {
    return parse_scores_detailed(reply, m).scores;
}

/// Indices of the k highest scores; ties go to the lower index. Returned in
/// ascending index order.
inline std::vector<std::size_t> top_k(const std::vector<RelevanceScore>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a].value() > scores[b].value(); });
    idx.resize(std::min(k, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Which halves of retrieval run; the rest is replaced by seeded sampling.
struct RetrievalSwitches {
    bool meta_wise = true;
    bool instance_wise = true;
};

namespace detail {

inline std::vector<std::string> in_schema_order(const Table& table, const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& a : table.schema())
        if (std::find(names.begin(), names.end(), a.name) != names.end()) out.push_back(a.name);
    return out;
}

inline Context make_context(const Table& table, std::vector<std::string> attributes, const std::vector<Record>& rows,
                            std::string mode) {
    Context c;
    c.table = table.name();
    c.attributes = std::move(attributes);
    c.provenance.mode = std::move(mode);
    for (const auto& r : rows) {
        c.records.push_back(project(table, r, c.attributes));
        c.provenance.rows.push_back(r.index);
    }
    return c;
}

} // namespace detail

/// Context when retrieval is off: top_k seeded-random records (target rows
/// excluded) over every attribute.
inline Context sample_context(const TaskInstance& task, const DataLake& lake, const RetrievalConfig& config) {
    const Table& table = lake.table(task.table());
    auto rows = sample_records(table, config.top_k, config.seed, target_rows(task));
    return detail::make_context(table, table.attribute_names(), rows, "sampled");
}

/// Meta-wise then instance-wise retrieval for one task.
inline Context retrieve_context(const TaskInstance& task, const DataLake& lake, const RetrievalConfig& config,
                                Session& session, const TaskDescription& description, const QueryString& query,
                                RetrievalSwitches switches = {}) {
    config.validate();
    if (task.kind == TaskKind::Transformation || task.kind == TaskKind::InformationExtraction ||
        task.kind == TaskKind::JoinDiscovery)
        throw Error(ErrorCode::InvalidTask, std::string(to_string(task.kind)) + " tasks do not use record retrieval");

    const Table& table = lake.table(task.table());
    const std::vector<std::string> candidates = candidate_attributes(task, lake);
    const std::set<std::size_t> exclude = target_rows(task);

    // Meta-wise: S^t
    AttributeSelection selection;
    if (!candidates.empty()) {
        if (switches.meta_wise) {
            selection = parse_attribute_selection(
                session.ask(PromptKind::MetaSelect, render_meta_prompt(description, query, candidates)), candidates,
                config.attr_count);
        } else {
            selection.attributes =
                seeded_subset(std::vector<std::string>(candidates), config.attr_count, config.seed ^ 0x6d657461ULL);
            selection.attributes = detail::in_schema_order(table, selection.attributes);
        }
    }

    std::vector<std::string> context_attrs = selection.attributes;
    if (config.include_target_attribute && task.kind != TaskKind::TableQA)
        for (const auto& s : task.target_attributes)
            if (table.find_attribute(s) &&
                std::find(context_attrs.begin(), context_attrs.end(), s) == context_attrs.end())
                context_attrs.push_back(s);
    context_attrs = detail::in_schema_order(table, context_attrs);

    if (!switches.instance_wise) {
        auto rows = sample_records(table, config.top_k, config.seed, exclude);
        Context c = detail::make_context(table, context_attrs, rows, "retrieved");
        c.provenance.attribute_fallback = selection.fallback_used;
        return c;
    }

    // Instance-wise: score a seeded sample in batches, keep top-k.
    const std::vector<Record> sample = sample_records(table, config.sample_size, config.seed, exclude);
    std::vector<Record> scored_view;
    for (const auto& r : sample) scored_view.push_back(project(table, r, selection.attributes));

    std::vector<RelevanceScore> scores;
    std::size_t batches = 0;
    std::size_t defaulted = 0;
    for (std::size_t start = 0; start < scored_view.size(); start += config.score_batch_size) {
        std::size_t end = std::min(start + config.score_batch_size, scored_view.size());
        std::vector<Record> batch(scored_view.begin() + static_cast<std::ptrdiff_t>(start),
                                  scored_view.begin() + static_cast<std::ptrdiff_t>(end));
        auto parsed = parse_scores_detailed(
            session.ask(PromptKind::InstanceScore,
                        render_instance_prompt(description, query, selection.attributes, batch)),
            batch.size());
        scores.insert(scores.end(), parsed.scores.begin(), parsed.scores.end());
        defaulted += parsed.defaulted;
        ++batches;
    }

    std::vector<Record> kept;
    std::vector<int> kept_scores;
    for (std::size_t i : top_k(scores, config.top_k)) {
        kept.push_back(sample[i]);
        kept_scores.push_back(scores[i].value());
    }

    Context c = detail::make_context(table, context_attrs, kept, "retrieved");
    c.provenance.scores = std::move(kept_scores);
    c.provenance.candidates_scored = sample.size();
    c.provenance.score_batches = batches;
    c.provenance.zero_default_scores = defaulted;
    c.provenance.attribute_fallback = selection.fallback_used;
    return c;
}

/// Join discovery: a seeded sample of values from each named column.
inline std::pair<Context, Context> column_contexts(const TaskInstance& task, const DataLake& lake,
                                                   const RetrievalConfig& config) {
    auto one = [&](std::size_t side) {
        const Table& t = lake.table(task.tables[side]);
        t.require_attribute(task.target_attributes[side]);
        auto rows = sample_records(t, config.top_k, config.seed + side);
        return detail::make_context(t, {task.target_attributes[side]}, rows, "column");
    };
    return {one(0), one(1)};
}

/// Transformation demonstrations as a two-column context.
inline Context examples_context(const TaskInstance& task) {
    Context c;
    c.table = task.table();
    c.attributes = {"before", "after"};
    c.provenance.mode = "examples";
    for (std::size_t i = 0; i < task.transform_examples.size(); ++i) {
        Record r;
        r.index = i;
        r.cells = {CellValue::present(task.transform_examples[i].first),
                   CellValue::present(task.transform_examples[i].second)};
        c.records.push_back(std::move(r));
        c.provenance.rows.push_back(i);
    }
    return c;
}

/// Information extraction reads the document record itself; the attributes
/// being extracted are left out.
inline Context document_context(const TaskInstance& task, const DataLake& lake) {
    const Table& table = lake.table(task.table());
    std::vector<std::string> attrs;
    const auto& schema = *task.extraction_schema;
    for (const auto& a : table.schema())
        if (std::find(schema.begin(), schema.end(), a.name) == schema.end()) attrs.push_back(a.name);
    return detail::make_context(table, attrs, {table.record(task.rows[0])}, "document");
}

} // namespace unidm
