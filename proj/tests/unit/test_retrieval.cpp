#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "support/fixtures.hpp"
#include "unidm/retrieval.hpp"

using namespace unidm;

namespace {

std::vector<RelevanceScore> scores_of(std::initializer_list<int> v) {
    std::vector<RelevanceScore> out;
    for (int x : v) out.emplace_back(x);
    return out;
}

std::vector<int> values(const std::vector<RelevanceScore>& s) {
    std::vector<int> out;
    for (const auto& x : s) out.push_back(x.value());
    return out;
}

// Sort (score desc, index asc), take k, report indices ascending.
std::vector<std::size_t> top_k_oracle(const std::vector<int>& scores, std::size_t k) {
    std::vector<std::pair<int, std::size_t>> v;
    for (std::size_t i = 0; i < scores.size(); ++i) v.emplace_back(-scores[i], i);
    std::sort(v.begin(), v.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < std::min(k, v.size()); ++i) out.push_back(v[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

// Line-oriented reference parser for "i: score" replies.
std::vector<int> scores_oracle(const std::string& reply, std::size_t m) {
    std::vector<int> out(m, 0);
    std::vector<bool> seen(m, false);
    static const std::regex line_re(R"(^\s*(\d+)\s*:\s*(-?\d+)\s*$)");
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch mm;
        if (!std::regex_match(line, mm, line_re)) continue;
        long long idx = std::stoll(mm[1]);
        long long v = std::stoll(mm[2]);
        if (idx < 1 || static_cast<std::size_t>(idx) > m || seen[idx - 1]) continue;
        seen[idx - 1] = true;
        out[idx - 1] = static_cast<int>(std::clamp<long long>(v, 0, 3));
    }
    return out;
}

// Splits into maximal runs of [A-Za-z0-9_] and compares lowercase tokens.
std::vector<std::string> selection_oracle(const std::string& reply, const std::vector<std::string>& candidates,
                                          std::size_t attr_count, bool& fallback) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : reply) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') cur += static_cast<char>(std::tolower(c));
        else if (!cur.empty()) tokens.push_back(std::exchange(cur, ""));
    }
    if (!cur.empty()) tokens.push_back(cur);
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        if (out.size() >= attr_count) break;
        for (const auto& c : candidates)
            if (text::to_lower(c) == t && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    fallback = out.empty();
    if (fallback)
        for (std::size_t i = 0; i < std::min(attr_count, candidates.size()); ++i) out.push_back(candidates[i]);
    return out;
}

struct Fixture {
    DataLake lake;
    TaskInstance task;
    QueryString query;
    TaskDescription desc = task_description(TaskKind::Imputation);
    Fixture() {
        lake.add(testutil::case_study_table());
        task.kind = TaskKind::Imputation;
        task.tables = {"restaurant"};
        task.rows = {7};
        task.target_attributes = {"city"};
        query = build_query(task, lake);
    }
};

Table numbered(std::size_t rows) {
    std::string csv = "name,addr,phone,type,city\n";
    for (std::size_t i = 0; i < rows; ++i)
        csv += "r" + std::to_string(i) + ",a" + std::to_string(i) + ",p,t,c" + std::to_string(i) + "\n";
    return load_table(csv, "big");
}

} // namespace

TEST(MetaPrompt, Template) {
    EXPECT_EQ(render_meta_prompt({"data imputation"}, {"Copenhagen, timezone"}, {"city", "country"}),
              "The task is data imputation. The target query is Copenhagen, timezone. The candidate attributes are "
              "[city,country]. Which attributes are helpful for the task and the query?");
    EXPECT_NE(render_meta_prompt({"t"}, {"x"}, {"x"}).find("[x]"), std::string::npos);
    EXPECT_NE(render_meta_prompt({"t"}, {"a"}, {"x"}), render_meta_prompt({"t"}, {"b"}, {"x"}));
    EXPECT_THROW(render_meta_prompt({"t"}, {"a"}, {}), Error);
}

TEST(AttributeSelection, Examples) {
    auto a = parse_attribute_selection("The attribute country is most helpful.", {"city", "country"}, 1);
    EXPECT_EQ(a.attributes, (std::vector<std::string>{"country"}));
    EXPECT_FALSE(a.fallback_used);

    auto b = parse_attribute_selection("none of these", {"city", "country"}, 1);
    EXPECT_EQ(b.attributes, (std::vector<std::string>{"city"}));
    EXPECT_TRUE(b.fallback_used);

    auto c = parse_attribute_selection("Country, then CITY", {"city", "country"}, 2);
    EXPECT_EQ(c.attributes, (std::vector<std::string>{"country", "city"}));

    auto d = parse_attribute_selection("city_code matters", {"city", "city_code"}, 2);
    EXPECT_EQ(d.attributes, (std::vector<std::string>{"city_code"}));

    auto e = parse_attribute_selection("the zip code and zip", {"zip code", "zip"}, 2);
    EXPECT_EQ(e.attributes, (std::vector<std::string>{"zip code", "zip"}));
}

TEST(AttributeSelection, MatchesTokenOracle) {
    const std::vector<std::string> pool = {"city", "country", "city_code", "name", "addr", "phone", "type", "state"};
    const std::vector<std::string> filler = {"the", "and", "is", "helpful", "most", "x1"};
    const std::vector<std::string> seps = {" ", ", ", "\n", "; ", ". "};
    std::mt19937_64 gen(2024);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<std::string> candidates;
        for (const auto& p : pool)
            if (gen() % 2) candidates.push_back(p);
        if (candidates.empty()) candidates.push_back(pool[gen() % pool.size()]);
        std::string reply;
        std::size_t words = gen() % 8;
        for (std::size_t w = 0; w < words; ++w) {
            std::string tok = gen() % 2 ? pool[gen() % pool.size()] : filler[gen() % filler.size()];
            if (gen() % 3 == 0)
                for (auto& ch : tok) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            reply += tok + seps[gen() % seps.size()];
        }
        std::size_t attr_count = 1 + gen() % 3;
        bool fallback = false;
        auto expected = selection_oracle(reply, candidates, attr_count, fallback);
        auto got = parse_attribute_selection(reply, candidates, attr_count);
        ASSERT_EQ(got.attributes, expected) << "reply: " << reply;
        ASSERT_EQ(got.fallback_used, fallback);
    }
}

TEST(InstancePrompt, Numbering) {
    std::vector<Record> recs(3);
    for (std::size_t i = 0; i < 3; ++i) recs[i].cells = {CellValue::present("v" + std::to_string(i))};
    std::string p = render_instance_prompt({"t"}, {"q"}, {"a"}, recs);
    EXPECT_NE(p.find("score the relevance (range from 0 to 3)"), std::string::npos);
    EXPECT_NE(p.find("\n1: a:v0\n2: a:v1\n3: a:v2\n"), std::string::npos);
    EXPECT_EQ(p.find("4:"), std::string::npos);
    recs.resize(1);
    EXPECT_NE(render_instance_prompt({"t"}, {"q"}, {"a"}, recs).find("\n1: a:v0\n"), std::string::npos);
}

TEST(ParseScores, Examples) {
    EXPECT_EQ(values(parse_scores("1: 3\n2: 0\n3: 2", 3)), (std::vector<int>{3, 0, 2}));
    EXPECT_EQ(values(parse_scores("1: 7", 2)), (std::vector<int>{3, 0}));
    EXPECT_EQ(values(parse_scores("2: 1\n1: 2", 2)), (std::vector<int>{2, 1}));
    EXPECT_EQ(values(parse_scores("1: -4\n1: 2\n9: 3", 2)), (std::vector<int>{0, 0}));
    EXPECT_EQ(parse_scores_detailed("1: 2", 3).defaulted, 2u);
    EXPECT_EQ(values(parse_scores("Scores: 1: 2, 2: 3", 2)), (std::vector<int>{2, 3}));
    EXPECT_TRUE(parse_scores("", 0).empty());
}

TEST(ParseScores, PermutedFixturesMatchReference) {
    std::mt19937_64 gen(99);
    for (int iter = 0; iter < 1000; ++iter) {
        std::size_t m = 1 + gen() % 12;
        std::vector<std::string> lines;
        for (std::size_t i = 1; i <= m + 2; ++i) {
            if (gen() % 4 == 0) continue;  // missing index, or out of range beyond m
            int v = static_cast<int>(gen() % 12) - 3;
            lines.push_back(std::to_string(i) + ": " + std::to_string(v));
            if (gen() % 8 == 0) lines.push_back(std::to_string(i) + ":" + std::to_string(gen() % 4));  // duplicate
        }
        if (gen() % 3 == 0) lines.push_back("these look relevant");
        std::shuffle(lines.begin(), lines.end(), gen);
        std::string reply;
        for (const auto& l : lines) reply += l + "\n";
        ASSERT_EQ(values(parse_scores(reply, m)), scores_oracle(reply, m)) << reply;
    }
}

TEST(TopK, Examples) {
    EXPECT_EQ(top_k(scores_of({3, 0, 2}), 2), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(top_k(scores_of({1, 1, 1, 1}), 2), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(top_k(scores_of({1, 2}), 5), (std::vector<std::size_t>{0, 1}));
    EXPECT_TRUE(top_k({}, 3).empty());
}

TEST(TopK, MatchesSortOracle) {
    std::mt19937_64 gen(1);
    for (int iter = 0; iter < 2000; ++iter) {
        std::size_t n = gen() % 30;
        std::vector<int> raw(n);
        std::vector<RelevanceScore> s;
        for (auto& x : raw) {
            x = static_cast<int>(gen() % 4);
            s.emplace_back(x);
        }
        std::size_t k = gen() % (n + 3);
        ASSERT_EQ(top_k(s, k), top_k_oracle(raw, k));
    }
}

TEST(RetrieveContext, CaseStudyScript) {
    Fixture f;
    MockBackend m(testutil::case_study_rules());
    Session s(m, nullptr);
    RetrievalConfig cfg;  // 50, 3, 1
    Context c = retrieve_context(f.task, f.lake, cfg, s, f.desc, f.query);
    EXPECT_EQ(c.attributes, (std::vector<std::string>{"name", "city"}));
    EXPECT_EQ(c.provenance.rows, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(c.provenance.scores, (std::vector<int>{3, 3, 3}));
    EXPECT_EQ(c.provenance.candidates_scored, 9u);
    EXPECT_EQ(c.provenance.score_batches, 1u);
    EXPECT_EQ(c.records[0].cells[1], CellValue::present("beverly hills"));
    EXPECT_EQ(s.ledger().calls(PromptKind::MetaSelect), 1u);
    EXPECT_EQ(s.ledger().calls(PromptKind::InstanceScore), 1u);

    cfg.attr_count = 2;
    Session s2(m, nullptr);
    Context c2 = retrieve_context(f.task, f.lake, cfg, s2, f.desc, f.query);
    EXPECT_EQ(c2.attributes, (std::vector<std::string>{"name", "addr", "city"}));
}

TEST(RetrieveContext, BatchesAndExclusion) {
    DataLake lake;
    lake.add(numbered(40));
    MockBackend m({{"Which attributes", false, "addr", {}, {}},
                   {"score the relevance", false, "1: 3\n4: 2\n7: 1", {}, {}}});
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TaskInstance t;
        t.kind = TaskKind::Imputation;
        t.tables = {"big"};
        t.rows = {seed % 40};
        t.target_attributes = {"city"};
        RetrievalConfig cfg;
        cfg.sample_size = 25;
        cfg.top_k = 5;
        cfg.seed = seed;
        Session s(m, nullptr);
        Context c = retrieve_context(t, lake, cfg, s, task_description(t.kind), build_query(t, lake));
        EXPECT_EQ(c.provenance.score_batches, 3u);
        EXPECT_EQ(s.ledger().calls(PromptKind::InstanceScore), 3u);
        EXPECT_EQ(c.records.size(), 5u);
        for (std::size_t r : c.provenance.rows) EXPECT_NE(r, t.rows[0]);
        // second batch prompt restarts numbering at 1
        EXPECT_NE(s.trace()[2].prompt.find(":\n1: "), std::string::npos);
        EXPECT_EQ(s.trace()[3].prompt.find("\n6: "), std::string::npos);
    }
}

TEST(RetrieveContext, Ablations) {
    Fixture f;
    MockBackend m(testutil::case_study_rules());
    RetrievalConfig cfg;
    cfg.seed = 5;

    Session no_meta(m, nullptr);
    Context a = retrieve_context(f.task, f.lake, cfg, no_meta, f.desc, f.query, {false, true});
    EXPECT_EQ(no_meta.ledger().calls(PromptKind::MetaSelect), 0u);
    EXPECT_EQ(a.attributes.size(), 2u);  // one random candidate plus the target

    Session no_instance(m, nullptr);
    Context b = retrieve_context(f.task, f.lake, cfg, no_instance, f.desc, f.query, {true, false});
    EXPECT_EQ(no_instance.ledger().calls(PromptKind::InstanceScore), 0u);
    std::vector<std::size_t> expected;
    for (const auto& r : sample_records(f.lake.table("restaurant"), cfg.top_k, cfg.seed, {7})) expected.push_back(r.index);
    EXPECT_EQ(b.provenance.rows, expected);
}

TEST(SampleContext, WholeTableSeededSample) {
    Fixture f;
    RetrievalConfig cfg;
    cfg.seed = 17;
    Context c = sample_context(f.task, f.lake, cfg);
    const Table& t = f.lake.table("restaurant");
    EXPECT_EQ(c.attributes, t.attribute_names());
    auto rows = sample_records(t, cfg.top_k, 17, {7});
    ASSERT_EQ(c.records.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(c.records[i].cells, rows[i].cells);
    EXPECT_EQ(c.provenance.mode, "sampled");
}

TEST(RetrieveContext, RejectsKindsWithoutRetrieval) {
    Fixture f;
    MockBackend m;
    Session s(m, nullptr);
    TaskInstance t = f.task;
    t.kind = TaskKind::Transformation;
    t.transform_examples = {{"a", "b"}};
    EXPECT_THROW(retrieve_context(t, f.lake, {}, s, f.desc, f.query), Error);
    EXPECT_EQ(m.invocations(), 0u);
}

TEST(RetrievalConfig, Validate) {
    RetrievalConfig c;
    EXPECT_NO_THROW(c.validate());
    c.top_k = 0;
    EXPECT_THROW(c.validate(), Error);
    c.top_k = 60;
    EXPECT_THROW(c.validate(), Error);
}
