#include <gtest/gtest.h>

#include "unidm/taskmodel.hpp"

using namespace unidm;

namespace {

DataLake lake() {
    DataLake l;
    l.add(load_table("name,country,timezone\nCopenhagen,Denmark,\nRome,Italy,Central European Time\n", "cities"));
    l.add(load_table("name,addr,phone,type,city\nsheffield diner,1 main st,555,diner,sheffxeld\n", "hospital"));
    l.add(load_table("Rank,Nation,Gold,Silver,Bronze\n1,Canada,3,1,0\n2,Norway,2,2,1\n", "medals"));
    l.add(load_table("title,maker,price\npunch home design,punch software,199.99\npunch 41100,punch,18.99\n", "products"));
    l.add(load_table("date\n20201103\n", "dates"));
    l.add(load_table("page,name,team\n<html>kevin durant</html>,,\n", "players"));
    return l;
}

TaskInstance make(TaskKind kind, std::string table, std::vector<std::size_t> rows, std::vector<std::string> attrs) {
    TaskInstance t;
    t.kind = kind;
    t.tables = {std::move(table)};
    t.rows = std::move(rows);
    t.target_attributes = std::move(attrs);
    return t;
}

} // namespace

TEST(TaskKind, RoundTrip) {
    for (TaskKind k : kAllTaskKinds) EXPECT_EQ(parse_task_kind(to_string(k)), k);
    EXPECT_THROW(parse_task_kind("sorting"), Error);
    EXPECT_TRUE(is_binary(TaskKind::ErrorDetection));
    EXPECT_TRUE(is_binary(TaskKind::EntityResolution));
    EXPECT_TRUE(is_binary(TaskKind::JoinDiscovery));
    EXPECT_FALSE(is_binary(TaskKind::Imputation));
}

TEST(BuildQuery, PerKind) {
    DataLake l = lake();
    EXPECT_EQ(build_query(make(TaskKind::Imputation, "cities", {0}, {"timezone"}), l).text, "Copenhagen, timezone");
    EXPECT_EQ(build_query(make(TaskKind::Transformation, "dates", {0}, {"date"}), l).text, "20201103");
    EXPECT_EQ(build_query(make(TaskKind::ErrorDetection, "hospital", {0}, {"city"}), l).text, "city: sheffxeld?");

    auto er = make(TaskKind::EntityResolution, "products", {0, 1}, {});
    EXPECT_EQ(build_query(er, l).text,
              "Entity A is title:punch home design, maker:punch software, price:199.99, Entity B is title:punch 41100, "
              "maker:punch, price:18.99");

    auto qa = make(TaskKind::TableQA, "medals", {}, {});
    qa.question = "how many nations won at least 2 gold medals";
    EXPECT_EQ(build_query(qa, l).text, "how many nations won at least 2 gold medals");

    TaskInstance jd;
    jd.kind = TaskKind::JoinDiscovery;
    jd.tables = {"medals", "cities"};
    jd.target_attributes = {"Nation", "country"};
    EXPECT_EQ(build_query(jd, l).text, "medals.Nation and cities.country");
}

TEST(BuildQuery, KeyAttributeOverride) {
    DataLake l = lake();
    auto t = make(TaskKind::Imputation, "cities", {1}, {"timezone"});
    t.key_attribute = "country";
    EXPECT_EQ(build_query(t, l).text, "Italy, timezone");
}

TEST(BuildQuery, MissingCellInQuery) {
    DataLake l = lake();
    try {
        build_query(make(TaskKind::ErrorDetection, "cities", {0}, {"timezone"}), l);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingCellInQuery);
    }
}

TEST(CandidateAttributes, PerKind) {
    DataLake l = lake();
    EXPECT_EQ(candidate_attributes(make(TaskKind::Imputation, "hospital", {0}, {"city"}), l),
              (std::vector<std::string>{"name", "addr", "phone", "type"}));
    auto qa = make(TaskKind::TableQA, "medals", {}, {});
    qa.question = "q";
    EXPECT_EQ(candidate_attributes(qa, l), (std::vector<std::string>{"Rank", "Nation", "Gold", "Silver", "Bronze"}));
    auto ie = make(TaskKind::InformationExtraction, "players", {0}, {"name"});
    ie.extraction_schema = std::vector<std::string>{"name", "team"};
    EXPECT_TRUE(candidate_attributes(ie, l).empty());
}

TEST(Validate, Shapes) {
    EXPECT_THROW(validate(make(TaskKind::Imputation, "cities", {}, {"timezone"})), Error);
    EXPECT_THROW(validate(make(TaskKind::Imputation, "cities", {0}, {})), Error);
    EXPECT_THROW(validate(make(TaskKind::EntityResolution, "products", {0}, {})), Error);
    EXPECT_THROW(validate(make(TaskKind::TableQA, "medals", {}, {})), Error);
    EXPECT_NO_THROW(validate(make(TaskKind::Imputation, "cities", {0}, {"timezone"})));
}

TEST(TargetRows, EntityResolutionAcrossTables) {
    auto same = make(TaskKind::EntityResolution, "products", {0, 1}, {});
    EXPECT_EQ(target_rows(same), (std::set<std::size_t>{0, 1}));
    auto cross = same;
    cross.tables = {"products", "other"};
    EXPECT_EQ(target_rows(cross), (std::set<std::size_t>{0}));
}

TEST(TaskDescription, ShippedSentences) {
    EXPECT_EQ(task_description(TaskKind::Imputation).text,
              "data imputation which produces the missing data with some value to retain most of the data");
    EXPECT_EQ(task_description(TaskKind::ErrorDetection).text,
              "error detection which detect attribute error within a record in a data cleaning system");
    EXPECT_EQ(task_description(TaskKind::EntityResolution).text,
              "entity resolution which is the process of predicting whether two records are referencing the same "
              "real-world thing");
    EXPECT_EQ(task_description(TaskKind::Transformation).text,
              "data transformation which is the process of converting data from one format to another required "
              "format within a record");
    for (TaskKind k : kAllTaskKinds) EXPECT_FALSE(task_description(k).text.empty());
}

TEST(TaskDescription, Override) {
    TaskDescriptions d;
    d.set(TaskKind::Imputation, "fill the blank");
    EXPECT_EQ(d.get(TaskKind::Imputation).text, "fill the blank");
    EXPECT_EQ(d.get(TaskKind::ErrorDetection).text, task_description(TaskKind::ErrorDetection).text);
}

TEST(TaskJson, ParseAndRoundTrip) {
    auto t = parse_task_json(nlohmann::json::parse(
        R"({"id":"x1","kind":"entity_resolution","table":"products","row":[0,1]})"));
    EXPECT_EQ(t.id, "x1");
    EXPECT_EQ(t.kind, TaskKind::EntityResolution);
    EXPECT_EQ(t.rows, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(parse_task_json(task_to_json(t)).rows, t.rows);

    auto tr = parse_task_json(nlohmann::json::parse(
        R"({"kind":"transformation","table":"dates","row":0,"attributes":["date"],
            "examples":[["20000101","2000-01-01"],{"before":"19991231","after":"1999-12-31"}]})"));
    ASSERT_EQ(tr.transform_examples.size(), 2u);
    EXPECT_EQ(tr.transform_examples[1].second, "1999-12-31");

    auto ie = parse_task_json(nlohmann::json::parse(
        R"({"kind":"information_extraction","table":"players","row":0,"schema":["name","team"]})"));
    EXPECT_EQ(ie.target_attributes, (std::vector<std::string>{"name"}));
    EXPECT_THROW(parse_task_json(nlohmann::json::parse(R"({"kind":"nope","table":"t"})")), Error);
}
