#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "unidm/error.hpp"
#include "unidm/rng.hpp"

namespace unidm {

struct Attribute {
    std::string name;
    std::size_t position = 0;

    bool operator==(const Attribute&) const = default;
};

/// A cell is either present text or missing. Present text may be empty only
/// when the table was loaded with a non-empty missing sentinel.
class CellValue {
public:
    CellValue() = default;  // Missing
    static CellValue missing() { return {}; }
    static CellValue present(std::string text) {
        CellValue v;
        v.text_ = std::move(text);
        return v;
    }

    bool is_missing() const noexcept { return !text_.has_value(); }
    bool is_present() const noexcept { return text_.has_value(); }
    const std::string& text() const { return text_.value(); }
    const std::optional<std::string>& optional_text() const noexcept { return text_; }

    bool operator==(const CellValue&) const = default;

private:
    std::optional<std::string> text_;
};

struct Record {
    std::vector<CellValue> cells;
    std::size_t index = 0;

    bool operator==(const Record&) const = default;
};

class Table {
public:
    Table() = default;
    Table(std::string name, std::vector<Attribute> schema, std::vector<Record> records)
        : name_(std::move(name)), schema_(std::move(schema)), records_(std::move(records)) {
        if (name_.empty()) throw Error(ErrorCode::UnknownTable, "table name must be non-empty");
        for (const auto& a : schema_) {
            if (!positions_.emplace(a.name, a.position).second)
                throw Error(ErrorCode::DuplicateAttribute, "duplicate attribute '" + a.name + "'");
        }
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<Attribute>& schema() const noexcept { return schema_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    std::size_t row_count() const noexcept { return records_.size(); }

    std::vector<std::string> attribute_names() const {
        std::vector<std::string> names;
        names.reserve(schema_.size());
        for (const auto& a : schema_) names.push_back(a.name);
        return names;
    }

    std::optional<std::size_t> find_attribute(std::string_view name) const {
        auto it = positions_.find(std::string(name));
        if (it == positions_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require_attribute(std::string_view name) const {
        auto pos = find_attribute(name);
        if (!pos)
            throw Error(ErrorCode::UnknownAttribute,
                        "no attribute '" + std::string(name) + "' in table '" + name_ + "'");
        return *pos;
    }

    const Record& record(std::size_t row) const {
        if (row >= records_.size())
            throw Error(ErrorCode::RowOutOfRange, "row " + std::to_string(row) + " out of range for table '" +
                                                      name_ + "' with " + std::to_string(records_.size()) + " rows");
        return records_[row];
    }

    /// r[s]
    const CellValue& cell(std::size_t row, std::string_view attribute) const {
        std::size_t col = require_attribute(attribute);
        return record(row).cells[col];
    }

    bool operator==(const Table& other) const {
        return name_ == other.name_ && schema_ == other.schema_ && records_ == other.records_;
    }

    friend Table with_records(const Table& t, std::vector<Record> records) {
        Table copy = t;
        copy.records_ = std::move(records);
        return copy;
    }

private:
    std::string name_;
    std::vector<Attribute> schema_;
    std::vector<Record> records_;
    std::unordered_map<std::string, std::size_t> positions_;
};

inline const CellValue& cell(const Table& table, std::size_t row, std::string_view attribute) {
    return table.cell(row, attribute);
}

class DataLake {
public:
    void add(Table table) {
        if (find(table.name()))
            throw Error(ErrorCode::DuplicateTable, "duplicate table name '" + table.name() + "'");
        tables_.push_back(std::move(table));
    }

    const Table* find(std::string_view name) const {
        for (const auto& t : tables_)
            if (t.name() == name) return &t;
        return nullptr;
    }

    const Table& table(std::string_view name) const {
        if (const Table* t = find(name)) return *t;
        throw Error(ErrorCode::UnknownTable, "no table named '" + std::string(name) + "'");
    }

    const std::vector<Table>& tables() const noexcept { return tables_; }

private:
    std::vector<Table> tables_;
};

struct CellKey {
    std::string table;
    std::size_t row = 0;
    std::string attribute;

    auto operator<=>(const CellKey&) const = default;
};

struct GroundTruth {
    std::map<CellKey, std::string> entries;
};

namespace detail {

// RFC 4180 tokenizer. Accepts LF or CRLF record endings; a final line ending is
// optional. Quotes inside an unquoted field are taken literally.
inline std::vector<std::vector<std::string>> parse_csv_rows(std::string_view data) {
    std::vector<std::vector<std::string>> rows;
    if (data.substr(0, 3) == "\xEF\xBB\xBF") data.remove_prefix(3);

    std::vector<std::string> row;
    std::string field;
    std::size_t i = 0;
    std::size_t line = 1;
    bool field_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    while (i < data.size()) {
        char c = data[i];
        if (c == '"' && !field_started) {
            field_started = true;
            ++i;
            bool closed = false;
            while (i < data.size()) {
                if (data[i] == '"') {
                    if (i + 1 < data.size() && data[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    closed = true;
                    ++i;
                    break;
                }
                if (data[i] == '\n') ++line;
                field += data[i++];
            }
            if (!closed)
                throw Error(ErrorCode::MalformedCsv, "unbalanced quote starting near line " + std::to_string(line));
            if (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r')
                throw Error(ErrorCode::MalformedCsv,
                            "unexpected character after closing quote on line " + std::to_string(line));
            continue;
        }
        if (c == ',') {
            end_field();
            ++i;
            continue;
        }
        if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
            ++i;
            continue;
        }
        if (c == '\n') {
            end_row();
            ++line;
            ++i;
            continue;
        }
        field_started = true;
        field += c;
        ++i;
    }
    if (field_started || !row.empty()) end_row();
    return rows;
}

} // namespace detail

/// Loads a UTF-8 RFC 4180 CSV with a header row. Cells equal to
/// `missing_sentinel` become Missing; everything else is Present.
inline Table load_table(std::string_view csv, std::string name, std::string_view missing_sentinel = "") {
    auto rows = detail::parse_csv_rows(csv);
    if (rows.empty()) throw Error(ErrorCode::EmptyHeader, "CSV has no header row");

    std::vector<Attribute> schema;
    std::set<std::string> seen;
    for (std::size_t c = 0; c < rows[0].size(); ++c) {
        const std::string& col = rows[0][c];
        if (col.empty()) throw Error(ErrorCode::EmptyHeader, "header column " + std::to_string(c) + " is empty");
        if (!seen.insert(col).second) throw Error(ErrorCode::DuplicateAttribute, "duplicate attribute '" + col + "'");
        schema.push_back({col, c});
    }

    std::vector<Record> records;
    records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != schema.size())
            throw Error(ErrorCode::MalformedCsv, "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                                     " fields, header has " + std::to_string(schema.size()));
        Record rec;
        rec.index = r - 1;
        rec.cells.reserve(schema.size());
        for (auto& f : rows[r]) {
            if (f == missing_sentinel)
                rec.cells.push_back(CellValue::missing());
            else
                rec.cells.push_back(CellValue::present(std::move(f)));
        }
        records.push_back(std::move(rec));
    }
    return Table(std::move(name), std::move(schema), std::move(records));
}

inline Table load_table(std::istream& in, std::string name, std::string_view missing_sentinel = "") {
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_table(std::string_view(data), std::move(name), missing_sentinel);
}

/// Table name defaults to the file stem.
inline Table load_table_file(const std::filesystem::path& path, std::string_view missing_sentinel = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::BenchmarkUnreadable, "cannot open '" + path.string() + "'");
    return load_table(in, path.stem().string(), missing_sentinel);
}

/// Masks ceil(fraction * present) seeded-chosen Present cells under
/// `attribute`. The input table is left untouched.
inline std::pair<Table, GroundTruth> mask_cells(const Table& table, std::string_view attribute, double fraction,
                                                std::uint64_t seed) {
    std::size_t col = table.require_attribute(attribute);
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::InvalidTask, "mask fraction must lie in (0, 1]");

    std::vector<std::size_t> present;
    for (const auto& rec : table.records())
        if (rec.cells[col].is_present()) present.push_back(rec.index);
    if (present.empty())
        throw Error(ErrorCode::NoMaskableCells, "no present cells under '" + std::string(attribute) + "'");

    const double want = fraction * static_cast<double>(present.size());
    auto count = static_cast<std::size_t>(std::ceil(want - 1e-9));
    count = std::min(std::max<std::size_t>(count, 1), present.size());

    auto chosen = seeded_subset(std::move(present), count, seed);

    std::vector<Record> records = table.records();
    GroundTruth truth;
    for (std::size_t row : chosen) {
        truth.entries.emplace(CellKey{table.name(), row, std::string(attribute)}, records[row].cells[col].text());
        records[row].cells[col] = CellValue::missing();
    }
    return {with_records(table, std::move(records)), std::move(truth)};
}

/// Uniform seeded sample without replacement from rows not in `exclude`,
/// returned in ascending row order.
inline std::vector<Record> sample_records(const Table& table, std::size_t n, std::uint64_t seed,
                                          const std::set<std::size_t>& exclude = {}) {
    std::vector<std::size_t> eligible;
    eligible.reserve(table.row_count());
    for (const auto& rec : table.records())
        if (!exclude.contains(rec.index)) eligible.push_back(rec.index);

    std::vector<Record> out;
    for (std::size_t row : seeded_subset(std::move(eligible), n, seed)) out.push_back(table.records()[row]);
    return out;
}

} // namespace unidm
