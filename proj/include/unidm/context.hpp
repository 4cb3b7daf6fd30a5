#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "unidm/datalake.hpp"

namespace unidm {

/// Where a context came from; surfaced in run reports.
struct ContextProvenance {
    std::string mode;                 // "retrieved", "sampled", "examples", "document", "column"
    std::vector<std::size_t> rows;    // source row indices, same order as Context::records
    std::vector<int> scores;          // relevance score per kept record (retrieved mode only)
    std::size_t candidates_scored = 0;
    std::size_t score_batches = 0;
    std::size_t zero_default_scores = 0;
    bool attribute_fallback = false;
};

/// Retrieved tabular context: records projected onto `attributes`.
struct Context {
    std::string table;
    std::vector<std::string> attributes;
    std::vector<Record> records;  // each record holds one cell per entry of `attributes`
    ContextProvenance provenance;
};

/// Projects `record` of `table` onto the named attributes.
inline Record project(const Table& table, const Record& record, const std::vector<std::string>& attributes) {
    Record out;
    out.index = record.index;
    out.cells.reserve(attributes.size());
    for (const auto& a : attributes) out.cells.push_back(record.cells[table.require_attribute(a)]);
    return out;
}

struct SerializedContext {
    std::string text;
    std::size_t pair_count = 0;
    std::size_t skipped_missing = 0;
};

namespace detail {

inline bool needs_quoting(std::string_view s) {
    return s.find_first_of(",:\n\r\"") != std::string_view::npos;
}

inline void append_escaped(std::string& out, std::string_view s) {
    if (!needs_quoting(s)) {
        out += s;
        return;
    }
    out += '"';
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

} // namespace detail

/// One record as `attr:value` pairs joined by ", ". Missing cells are skipped.
/// Names and values containing `,` `:` `"` or a line break are double-quoted
/// with inner quotes doubled.
inline std::string serialize_record(const std::vector<std::string>& attributes, const Record& record,
                                    std::size_t* pairs = nullptr, std::size_t* skipped = nullptr) {
    std::string out;
    bool first = true;
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        const CellValue& v = record.cells[i];
        if (v.is_missing()) {
            if (skipped) ++*skipped;
            continue;
        }
        if (!first) out += ", ";
        first = false;
        detail::append_escaped(out, attributes[i]);
        out += ':';
        detail::append_escaped(out, v.text());
        if (pairs) ++*pairs;
    }
    return out;
}

/// Records are joined by '\n'.
inline SerializedContext serialize(const Context& context) {
    SerializedContext out;
    for (std::size_t r = 0; r < context.records.size(); ++r) {
        if (r) out.text += '\n';
        out.text += serialize_record(context.attributes, context.records[r], &out.pair_count, &out.skipped_missing);
    }
    return out;
}

} // namespace unidm
