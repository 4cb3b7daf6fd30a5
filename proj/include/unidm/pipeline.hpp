#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "unidm/contextparse.hpp"
#include "unidm/datalake.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/promptgen.hpp"
#include "unidm/retrieval.hpp"
#include "unidm/taskmodel.hpp"

namespace unidm {

/// Stage switches plus retrieval and generation settings for one run.
/// meta_wise / instance_wise only matter while retrieval is on.
struct PipelineConfig {
    bool retrieval_enabled = true;
    bool meta_wise_enabled = true;
    bool instance_wise_enabled = true;
    bool parsing_enabled = true;
    bool prompt_construction_enabled = true;
    RetrievalConfig retrieval;
    LlmSettings llm;
    std::uint64_t seed = 0;
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    return {
        {"retrieval_enabled", c.retrieval_enabled},
        {"meta_wise_enabled", c.meta_wise_enabled},
        {"instance_wise_enabled", c.instance_wise_enabled},
        {"parsing_enabled", c.parsing_enabled},
        {"prompt_construction_enabled", c.prompt_construction_enabled},
        {"sample_size", c.retrieval.sample_size},
        {"top_k", c.retrieval.top_k},
        {"attr_count", c.retrieval.attr_count},
        {"score_batch_size", c.retrieval.score_batch_size},
        {"include_target_attribute", c.retrieval.include_target_attribute},
        {"model", c.llm.model},
        {"temperature", c.llm.temperature},
        {"max_tokens", c.llm.max_tokens},
        {"seed", c.seed},
    };
}

/// Everything one pipeline execution produced.
struct TaskRun {
    QueryString query;
    std::vector<Context> contexts;  // two for join discovery, otherwise one
    ParsedContext parsed;           // C' (joined for join discovery)
    std::string claim;
    std::string cq_prompt;
    std::string cloze;              // p_as, or the direct prompt when construction is off
    Answer answer;
};

/// Runs one task end to end through `session`. `config.seed` is the sampling
/// seed for this task and overrides `config.retrieval.seed`.
inline TaskRun run_task(const TaskInstance& task, const DataLake& lake, const PipelineConfig& config, Session& session,
                        const TaskDescriptions& descriptions = {}, const DemoLibrary& library = DemoLibrary::shipped()) {
    validate(task);
    TaskRun run;
    run.query = build_query(task, lake);
    const TaskDescription description = descriptions.get(task.kind);
    RetrievalConfig retrieval = config.retrieval;
    retrieval.seed = config.seed;

    // Context retrieval
    switch (task.kind) {
    case TaskKind::Transformation:
        run.contexts.push_back(examples_context(task));
        break;
    case TaskKind::InformationExtraction:
        run.contexts.push_back(document_context(task, lake));
        break;
    case TaskKind::JoinDiscovery: {
        auto [a, b] = column_contexts(task, lake, retrieval);
        run.contexts.push_back(std::move(a));
        run.contexts.push_back(std::move(b));
        break;
    }
    default:
        if (config.retrieval_enabled)
            run.contexts.push_back(retrieve_context(task, lake, retrieval, session, description, run.query,
                                                    {config.meta_wise_enabled, config.instance_wise_enabled}));
        else
            run.contexts.push_back(sample_context(task, lake, retrieval));
        break;
    }

    // Context data parsing
    const QueryString* parse_query = task.kind == TaskKind::InformationExtraction ? &run.query : nullptr;
    if (run.contexts.size() == 1) {
        run.parsed = parse_context(run.contexts[0], session, config.parsing_enabled, parse_query);
    } else {
        ParsedContext joined;
        for (std::size_t i = 0; i < run.contexts.size(); ++i) {
            ParsedContext part = parse_context(run.contexts[i], session, config.parsing_enabled, parse_query);
            if (i) {
                joined.text += '\n';
                joined.serialized.text += '\n';
            }
            joined.text += part.text;
            joined.serialized.text += part.serialized.text;
            joined.serialized.pair_count += part.serialized.pair_count;
            joined.serialized.skipped_missing += part.serialized.skipped_missing;
            joined.parsed_by_llm = joined.parsed_by_llm || part.parsed_by_llm;
        }
        run.parsed = std::move(joined);
    }

    // Target prompt construction
    std::string raw;
    if (config.prompt_construction_enabled) {
        run.claim = build_claim(description, run.parsed, run.query);
        run.cq_prompt = render_cq_prompt(library, run.claim, task.kind);
        run.cloze = generate_cloze(run.cq_prompt, session);
        raw = answer(run.cloze, session);
    } else {
        run.cloze = direct_prompt(run.parsed, run.query);
        raw = answer(run.cloze, session, PromptKind::Direct);
    }
    run.answer = extract_answer(raw, task.kind);
    return run;
}

} // namespace unidm
