#pragma once

#include <optional>
#include <string>

#include "unidm/context.hpp"
#include "unidm/error.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/taskmodel.hpp"
#include "unidm/text.hpp"

namespace unidm {

struct ParsedContext {
    std::string text;  // C'
    bool parsed_by_llm = false;
    SerializedContext serialized;  // V
};

inline constexpr std::string_view kParseInstruction =
    "Given the data, convert the items into a textual format that encompasses all relevant information in a "
    "logical order: ";

/// p_dp. For information extraction the query is appended so the rewrite is
/// steered toward the attribute being extracted.
inline std::string render_parse_prompt(const std::string& serialized, const QueryString* query = nullptr) {
    if (serialized.empty()) throw Error(ErrorCode::EmptyContext, "nothing to parse: serialized context is empty");
    std::string out = std::string(kParseInstruction) + serialized;
    if (query) out += " The target query is " + query->text + ".";
    return out;
}

/// Serializes the context and, when enabled, asks the LLM to rewrite it as
/// logic text. Disabled (or an empty V) leaves C' == V.
inline ParsedContext parse_context(const Context& context, Session& session, bool enabled,
                                   const QueryString* query = nullptr) {
    ParsedContext out;
    out.serialized = serialize(context);
    if (!enabled || out.serialized.text.empty()) {
        out.text = out.serialized.text;
        return out;
    }
    out.text = text::trim(session.ask(PromptKind::Parse, render_parse_prompt(out.serialized.text, query)));
    out.parsed_by_llm = true;
    return out;
}

} // namespace unidm
