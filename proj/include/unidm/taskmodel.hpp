#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "unidm/context.hpp"
#include "unidm/datalake.hpp"
#include "unidm/error.hpp"
#include "unidm/text.hpp"

namespace unidm {

enum class TaskKind {
    Imputation,
    Transformation,
    ErrorDetection,
    EntityResolution,
    TableQA,
    JoinDiscovery,
    InformationExtraction,
};

inline constexpr std::array<TaskKind, 7> kAllTaskKinds = {
    TaskKind::Imputation,       TaskKind::Transformation, TaskKind::ErrorDetection,       TaskKind::EntityResolution,
    TaskKind::TableQA,          TaskKind::JoinDiscovery,  TaskKind::InformationExtraction,
};

constexpr std::string_view to_string(TaskKind kind) noexcept {
    switch (kind) {
    case TaskKind::Imputation: return "imputation";
    case TaskKind::Transformation: return "transformation";
    case TaskKind::ErrorDetection: return "error_detection";
    case TaskKind::EntityResolution: return "entity_resolution";
    case TaskKind::TableQA: return "table_qa";
    case TaskKind::JoinDiscovery: return "join_discovery";
    case TaskKind::InformationExtraction: return "information_extraction";
    }
    return "unknown";
}

inline TaskKind parse_task_kind(std::string_view name) {
    std::string n = text::to_lower(name);
    for (char& c : n)
        if (c == '-') c = '_';
    for (TaskKind k : kAllTaskKinds)
        if (to_string(k) == n) return k;
    if (n == "tableqa") return TaskKind::TableQA;
    throw Error(ErrorCode::InvalidTask, "unknown task kind '" + std::string(name) + "'");
}

/// Kinds answered with yes/no.
constexpr bool is_binary(TaskKind kind) noexcept {
    return kind == TaskKind::ErrorDetection || kind == TaskKind::EntityResolution || kind == TaskKind::JoinDiscovery;
}

/// The unified task form: kind T, target records R, target attributes S.
///
/// Shapes per kind:
///   Imputation / Transformation / ErrorDetection: one table, one row, one attribute.
///   EntityResolution: two rows, from `tables[0]` and `tables.back()` (one or two tables);
///     `target_attributes`, when non-empty, restricts which attributes describe each entity.
///   TableQA: one table, no rows (R is the whole table), `question` set.
///   JoinDiscovery: two tables, one attribute each (`target_attributes[i]` belongs to `tables[i]`).
///   InformationExtraction: one table, one row (the document), one target attribute, `extraction_schema` set.
struct TaskInstance {
    std::string id;
    TaskKind kind = TaskKind::Imputation;
    std::vector<std::string> tables;
    std::vector<std::size_t> rows;
    std::vector<std::string> target_attributes;
    std::optional<std::string> question;
    std::optional<std::vector<std::string>> extraction_schema;
    std::vector<std::pair<std::string, std::string>> transform_examples;
    std::optional<std::string> key_attribute;

    const std::string& table() const { return tables.front(); }
};

struct QueryString {
    std::string text;
};

struct TaskDescription {
    std::string text;
};

inline void validate(const TaskInstance& task) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvalidTask, std::string(to_string(task.kind)) + " task: " + why);
    };
    if (task.tables.empty()) fail("needs a table");
    switch (task.kind) {
    case TaskKind::Imputation:
    case TaskKind::Transformation:
    case TaskKind::ErrorDetection:
        if (task.rows.size() != 1) fail("needs exactly one target row");
        if (task.target_attributes.size() != 1) fail("needs exactly one target attribute");
        break;
    case TaskKind::EntityResolution:
        if (task.rows.size() != 2) fail("needs exactly two target rows");
        if (task.tables.size() > 2) fail("spans at most two tables");
        break;
    case TaskKind::TableQA:
        if (!task.question || task.question->empty()) fail("needs a question");
        break;
    case TaskKind::JoinDiscovery:
        if (task.tables.size() != 2) fail("needs two tables");
        if (task.target_attributes.size() != 2) fail("needs one column per table");
        break;
    case TaskKind::InformationExtraction:
        if (!task.extraction_schema) fail("needs an extraction schema");
        if (task.rows.size() != 1) fail("needs exactly one document row");
        if (task.target_attributes.size() != 1) fail("needs exactly one target attribute");
        break;
    }
}

/// Row indices of R in the task's primary table.
inline std::set<std::size_t> target_rows(const TaskInstance& task) {
    std::set<std::size_t> rows;
    if (task.kind == TaskKind::EntityResolution) {
        rows.insert(task.rows[0]);
        if (task.tables.size() == 1) rows.insert(task.rows[1]);
        return rows;
    }
    rows.insert(task.rows.begin(), task.rows.end());
    return rows;
}

namespace detail {

inline const std::string& present_or_throw(const CellValue& v, const TaskInstance& task, std::string_view attr) {
    if (v.is_missing())
        throw Error(ErrorCode::MissingCellInQuery, std::string(to_string(task.kind)) + " query references missing cell '" +
                                                       std::string(attr) + "'");
    return v.text();
}

inline std::string serialize_entity(const Table& table, std::size_t row, const std::vector<std::string>& restrict_to) {
    std::vector<std::string> attrs = restrict_to.empty() ? table.attribute_names() : restrict_to;
    return serialize_record(attrs, project(table, table.record(row), attrs));
}

} // namespace detail

/// Renders the target query Q for a task.
inline QueryString build_query(const TaskInstance& task, const DataLake& lake) {
    validate(task);
    const Table& table = lake.table(task.table());
    switch (task.kind) {
    case TaskKind::Imputation: {
        const std::string& attr = task.target_attributes[0];
        table.require_attribute(attr);
        std::string key_attr = task.key_attribute.value_or(table.schema().front().name);
        const CellValue& key = table.cell(task.rows[0], key_attr);
        return {(key.is_present() ? key.text() : std::string()) + ", " + attr};
    }
    case TaskKind::Transformation: {
        const std::string& attr = task.target_attributes[0];
        return {detail::present_or_throw(table.cell(task.rows[0], attr), task, attr)};
    }
    case TaskKind::ErrorDetection: {
        const std::string& attr = task.target_attributes[0];
        return {attr + ": " + detail::present_or_throw(table.cell(task.rows[0], attr), task, attr) + "?"};
    }
    case TaskKind::EntityResolution: {
        const Table& second = lake.table(task.tables.back());
        return {"Entity A is " + detail::serialize_entity(table, task.rows[0], task.target_attributes) +
                ", Entity B is " + detail::serialize_entity(second, task.rows[1], task.target_attributes)};
    }
    case TaskKind::TableQA:
        return {*task.question};
    case TaskKind::JoinDiscovery: {
        const Table& second = lake.table(task.tables[1]);
        table.require_attribute(task.target_attributes[0]);
        second.require_attribute(task.target_attributes[1]);
        return {table.name() + "." + task.target_attributes[0] + " and " + second.name() + "." +
                task.target_attributes[1]};
    }
    case TaskKind::InformationExtraction:
        return {task.target_attributes[0]};
    }
    throw Error(ErrorCode::InvalidTask, "unhandled task kind");
}

/// S' for meta-wise retrieval.
inline std::vector<std::string> candidate_attributes(const TaskInstance& task, const DataLake& lake) {
    const Table& table = lake.table(task.table());
    switch (task.kind) {
    case TaskKind::InformationExtraction:
    case TaskKind::JoinDiscovery:
        return {};
    case TaskKind::TableQA:
        return table.attribute_names();
    default:
        break;
    }
    std::set<std::string> targets(task.target_attributes.begin(), task.target_attributes.end());
    for (const auto& t : targets) table.require_attribute(t);
    std::vector<std::string> out;
    for (const auto& a : table.schema())
        if (!targets.contains(a.name)) out.push_back(a.name);
    return out;
}

/// Per-kind task sentences. The first four are the demonstration-library
/// wording; the rest follow the same "<task> which <definition>" shape.
class TaskDescriptions {
public:
    TaskDescriptions() {
        set(TaskKind::Imputation, "data imputation which produces the missing data with some value to retain most of the data");
        set(TaskKind::Transformation, "data transformation which is the process of converting data from one format to "
                                      "another required format within a record");
        set(TaskKind::ErrorDetection, "error detection which detect attribute error within a record in a data cleaning system");
        set(TaskKind::EntityResolution, "entity resolution which is the process of predicting whether two records are "
                                        "referencing the same real-world thing");
        set(TaskKind::TableQA, "table question answering which answers a question by finding the relevant information "
                               "in a data table");
        set(TaskKind::JoinDiscovery, "join discovery which finds whether two columns from different tables are "
                                     "semantically joinable");
        set(TaskKind::InformationExtraction, "information extraction which populates a pre-defined attribute with a "
                                             "value taken from a semi-structured document");
    }

    void set(TaskKind kind, std::string text) {
        if (text.empty()) throw Error(ErrorCode::ConfigInvalid, "task description must be non-empty");
        texts_[kind] = std::move(text);
    }

    TaskDescription get(TaskKind kind) const { return {texts_.at(kind)}; }

private:
    std::map<TaskKind, std::string> texts_;
};

inline TaskDescription task_description(TaskKind kind) {
    static const TaskDescriptions defaults;
    return defaults.get(kind);
}

namespace detail {

template <typename T>
std::vector<T> one_or_many(const nlohmann::json& j) {
    if (j.is_array()) return j.get<std::vector<T>>();
    return {j.get<T>()};
}

} // namespace detail

/// Parses one line of a task file:
///   {"id", "kind", "table", "row", "attributes", "question", "schema", "examples", "key_attribute"}
/// `table`, `row` and `attributes` accept a scalar or an array; `examples` is a
/// list of [before, after] pairs or {"before", "after"} objects.
inline TaskInstance parse_task_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidTask, "task must be a JSON object");
    TaskInstance t;
    try {
        t.kind = parse_task_kind(j.at("kind").get<std::string>());
        if (j.contains("id")) t.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        t.tables = detail::one_or_many<std::string>(j.at("table"));
        if (j.contains("row") && !j["row"].is_null()) t.rows = detail::one_or_many<std::size_t>(j["row"]);
        if (j.contains("attributes") && !j["attributes"].is_null())
            t.target_attributes = detail::one_or_many<std::string>(j["attributes"]);
        if (j.contains("question") && !j["question"].is_null()) t.question = j["question"].get<std::string>();
        if (j.contains("schema") && !j["schema"].is_null())
            t.extraction_schema = j["schema"].get<std::vector<std::string>>();
        if (j.contains("key_attribute") && !j["key_attribute"].is_null())
            t.key_attribute = j["key_attribute"].get<std::string>();
        if (j.contains("examples") && !j["examples"].is_null()) {
            for (const auto& e : j["examples"]) {
                if (e.is_array() && e.size() == 2)
                    t.transform_examples.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
                else if (e.is_object())
                    t.transform_examples.emplace_back(e.at("before").get<std::string>(), e.at("after").get<std::string>());
                else
                    throw Error(ErrorCode::InvalidTask, "transformation example must be [before, after]");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidTask, std::string("bad task field: ") + e.what());
    }
    if (t.kind == TaskKind::InformationExtraction && t.target_attributes.empty() && t.extraction_schema &&
        !t.extraction_schema->empty())
        t.target_attributes = {t.extraction_schema->front()};
    validate(t);
    return t;
}

inline nlohmann::json task_to_json(const TaskInstance& t) {
    nlohmann::json j;
    if (!t.id.empty()) j["id"] = t.id;
    j["kind"] = std::string(to_string(t.kind));
    if (t.tables.size() == 1)
        j["table"] = t.tables[0];
    else
        j["table"] = t.tables;
    if (t.rows.size() == 1)
        j["row"] = t.rows[0];
    else if (!t.rows.empty())
        j["row"] = t.rows;
    if (!t.target_attributes.empty()) j["attributes"] = t.target_attributes;
    if (t.question) j["question"] = *t.question;
    if (t.extraction_schema) j["schema"] = *t.extraction_schema;
    if (t.key_attribute) j["key_attribute"] = *t.key_attribute;
    if (!t.transform_examples.empty()) {
        nlohmann::json ex = nlohmann::json::array();
        for (const auto& [b, a] : t.transform_examples) ex.push_back({b, a});
        j["examples"] = ex;
    }
    return j;
}

} // namespace unidm
