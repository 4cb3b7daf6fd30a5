#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "unidm/contextparse.hpp"
#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/taskmodel.hpp"
#include "unidm/text.hpp"

namespace unidm {

/// A claim and the cloze question it should be rewritten into. An empty
/// `kinds` set marks a task-agnostic demonstration.
struct Demonstration {
    std::string claim;
    std::string cloze;
    std::set<TaskKind> kinds;
};

class DemoLibrary {
public:
    explicit DemoLibrary(std::vector<Demonstration> demos) : demos_(std::move(demos)) {
        if (demos_.empty()) throw Error(ErrorCode::ConfigInvalid, "demonstration library must be non-empty");
        for (const auto& d : demos_) {
            if (d.claim.empty() || d.cloze.empty())
                throw Error(ErrorCode::ConfigInvalid, "demonstration claim and cloze must be non-empty");
            if (d.cloze.find('_') == std::string::npos)
                throw Error(ErrorCode::ConfigInvalid, "demonstration cloze lacks the blank marker '_'");
        }
    }

    const std::vector<Demonstration>& demos() const& noexcept { return demos_; }
    std::vector<Demonstration> demos() && { return std::move(demos_); }

    /// The four shipped pairs: imputation, transformation, error detection,
    /// entity resolution.
    static DemoLibrary shipped() {
        return DemoLibrary({
            {"The task is data imputation which produces the missing data with some value to retain most of the "
             "data. The context is Wenham, Marysville, and Westmont are cities in the United States, identified by "
             "the ISO3 code USA. The target is city:New Cassel, iso3:USA, country:?",
             "Wenham, Marysville, and Westmont are cities in the United States, identified by the ISO3 code USA. "
             "New Cassel is the name of a city whose ISO3 country code is USA. New Kassel belongs to the country _.",
             {TaskKind::Imputation}},
            {"The task is data transformation which is the process of converting data from one format to another "
             "required format within a record. The context is data before transformation: 20000101 data after "
             "transformation: 2000-01-01. The target is 19990415:?",
             "20000101 can be transformed to 2000-01-01, and 19990415 can be transformed to _.",
             {TaskKind::Transformation}},
            {"The task is error detection which detect attribute error within a record in a data cleaning system. "
             "The context is the address of 2505 u s highway 431 north is not an error, the county name of mxrshxll "
             "is an error. The target is whether there is an error in city:sheffxeld.",
             "The address \"2505 U.S. Highway 431 North\" has no error, whereas the county name \"mxrshxll\" "
             "contains an error. It is required to identify if there is an error in the city name \"sheffxeld\". Is "
             "there an error in the city name? Yes or No. _",
             {TaskKind::ErrorDetection}},
            {"The task is entity resolution which is the process of predicting whether two records are referencing "
             "the same real-world thing. The context is A is the Punch! Home Design Architectural Series 4000 v10, "
             "manufactured by Punch! Software, is priced at $199.99. B is The Punch Software 41100 Punch! Home "
             "Design Architectural Series 18, manufactured by Punch Software, is priced at $18.99. The target is are "
             "A and B the same?",
             "Punch! Home Design Architectural Series 4000 v10, manufactured by Punch! Software, is priced at "
             "$199.99, whereas Punch Software 41100 Punch! Home Design Architectural Series 18, also manufactured by "
             "Punch Software, is priced at $18.99. Are these two products the same? Yes or No. _",
             {TaskKind::EntityResolution}},
        });
    }

    /// JSON Lines: {"claim", "cloze", "kinds": [kind names]}
    static DemoLibrary parse(std::string_view jsonl) {
        std::vector<Demonstration> demos;
        std::size_t lineno = 0;
        for (const auto& line : text::split_lines(jsonl)) {
            ++lineno;
            if (text::trim_view(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                Demonstration d;
                d.claim = j.at("claim").get<std::string>();
                d.cloze = j.at("cloze").get<std::string>();
                if (j.contains("kinds"))
                    for (const auto& k : j["kinds"]) d.kinds.insert(parse_task_kind(k.get<std::string>()));
                demos.push_back(std::move(d));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::ConfigInvalid, "demonstration line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return DemoLibrary(std::move(demos));
    }

    static DemoLibrary load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open demonstration library '" + path.string() + "'");
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(data);
    }

private:
    std::vector<Demonstration> demos_;
};

inline std::string build_claim(const TaskDescription& task, const ParsedContext& context, const QueryString& query) {
    return "The task is " + task.text + ". The context is " + context.text + ". The target query is " + query.text + ".";
}

inline constexpr std::string_view kClozeInstruction = "Write the claim as a cloze question.";

/// p_cq. Demonstrations for other kinds come first (library order), then the
/// task-agnostic ones, then those matching `kind`, so the closest examples sit
/// right before the target claim.
inline std::string render_cq_prompt(const DemoLibrary& library, const std::string& claim, TaskKind kind) {
    std::vector<const Demonstration*> ordered;
    for (const auto& d : library.demos())
        if (!d.kinds.empty() && !d.kinds.contains(kind)) ordered.push_back(&d);
    for (const auto& d : library.demos())
        if (d.kinds.empty()) ordered.push_back(&d);
    for (const auto& d : library.demos())
        if (d.kinds.contains(kind)) ordered.push_back(&d);

    std::string out(kClozeInstruction);
    out += '\n';
    for (const Demonstration* d : ordered) {
        out += "Claim:\n" + d->claim + "\nCloze question:\n" + d->cloze + "\n";
    }
    out += "Claim:\n" + claim + "\nCloze question:\n";
    return out;
}

/// p_as
inline std::string generate_cloze(const std::string& cq_prompt, Session& session) {
    std::string cloze = text::trim(session.ask(PromptKind::Cloze, cq_prompt));
    if (cloze.find('_') == std::string::npos)
        throw Error(ErrorCode::NoBlankInCloze, "cloze reply has no '_' blank: '" + cloze.substr(0, 200) + "'");
    return cloze;
}

/// First non-blank line of the reply, trimmed.
inline std::string first_answer_line(std::string_view reply) {
    for (const auto& line : text::split_lines(reply)) {
        std::string t = text::trim(line);
        if (!t.empty()) return t;
    }
    throw Error(ErrorCode::EmptyAnswer, "LLM returned an empty answer");
}

inline std::string answer(const std::string& cloze, Session& session, PromptKind kind = PromptKind::Answer) {
    if (cloze.empty()) throw Error(ErrorCode::EmptyAnswer, "answer prompt is empty");
    return first_answer_line(session.ask(kind, cloze));
}

/// Prompt used when target prompt construction is switched off.
inline std::string direct_prompt(const ParsedContext& context, const QueryString& query) {
    return context.text + "\n" + query.text + "?";
}

struct Answer {
    std::string raw;
    std::string normalized;
    std::optional<bool> boolean_value;
};

inline Answer extract_answer(std::string_view raw, TaskKind kind) {
    Answer a;
    a.raw = std::string(raw);
    a.normalized = text::normalize_answer(raw);
    if (!is_binary(kind)) return a;

    std::size_t i = 0;
    const std::string& s = a.normalized;
    while (i < s.size()) {
        while (i < s.size() && !std::isalnum(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t start = i;
        while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i]))) ++i;
        std::string_view tok(s.data() + start, i - start);
        if (tok == "yes") {
            a.boolean_value = true;
            return a;
        }
        if (tok == "no") {
            a.boolean_value = false;
            return a;
        }
    }
    throw Error(ErrorCode::AmbiguousBinaryAnswer, "no yes/no in answer '" + a.raw + "'");
}

} // namespace unidm
