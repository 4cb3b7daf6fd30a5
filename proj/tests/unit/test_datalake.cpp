#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "support/csv_oracle.hpp"
#include "support/tempdir.hpp"
#include "unidm/datalake.hpp"

using namespace unidm;

namespace {

const char* kRestaurantCsv = "name,addr,phone,type,city\n"
                             "belvedere,9882 little santa monica blvd.,310-788-2306,pacific new wave,Beverly Hills\n"
                             "ruth's chris steak house (los angeles),224 s. beverly dr.,310-859-8744,steakhouses,\n";

Table numbers_table(std::size_t rows) {
    std::string csv = "id,city\n";
    for (std::size_t i = 0; i < rows; ++i) csv += std::to_string(i) + ",c" + std::to_string(i) + "\n";
    return load_table(csv, "numbers");
}

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return ErrorCode::ConfigInvalid;
}

} // namespace

TEST(LoadTable, HeaderOnly) {
    Table t = load_table("a,b\n", "t");
    EXPECT_EQ(t.schema().size(), 2u);
    EXPECT_EQ(t.row_count(), 0u);
    EXPECT_EQ(t.schema()[1].name, "b");
    EXPECT_EQ(t.schema()[1].position, 1u);
}

TEST(LoadTable, TrailingEmptyCellIsMissing) {
    Table t = load_table(kRestaurantCsv, "restaurant");
    ASSERT_EQ(t.row_count(), 2u);
    EXPECT_TRUE(t.cell(1, "city").is_missing());
    EXPECT_EQ(t.cell(1, "name").text(), "ruth's chris steak house (los angeles)");
    EXPECT_EQ(t.cell(0, "city"), CellValue::present("Beverly Hills"));
    EXPECT_EQ(t.record(1).index, 1u);
}

TEST(LoadTable, QuotedComma) {
    Table t = load_table("v\n\"x,y\"\n", "t");
    ASSERT_EQ(t.row_count(), 1u);
    EXPECT_EQ(t.cell(0, "v"), CellValue::present("x,y"));
}

TEST(LoadTable, SingleCell) {
    Table t = load_table("name\nx", "t");
    EXPECT_EQ(cell(t, 0, "name"), CellValue::present("x"));
}

TEST(LoadTable, SentinelMarksMissingAndEmptyStaysPresent) {
    Table t = load_table("a,b\nNULL,\n", "t", "NULL");
    EXPECT_TRUE(t.cell(0, "a").is_missing());
    EXPECT_EQ(t.cell(0, "b"), CellValue::present(""));
}

TEST(LoadTable, CrlfAndBom) {
    Table t = load_table("\xEF\xBB\xBF" "a,b\r\n1,2\r\n", "t");
    EXPECT_EQ(t.schema()[0].name, "a");
    EXPECT_EQ(t.cell(0, "b").text(), "2");
}

TEST(LoadTable, Errors) {
    EXPECT_EQ(code_of([] { load_table("", "t"); }), ErrorCode::EmptyHeader);
    EXPECT_EQ(code_of([] { load_table("a,,b\n", "t"); }), ErrorCode::EmptyHeader);
    EXPECT_EQ(code_of([] { load_table("a,a\n", "t"); }), ErrorCode::DuplicateAttribute);
    EXPECT_EQ(code_of([] { load_table("a,b\n1\n", "t"); }), ErrorCode::MalformedCsv);
    EXPECT_EQ(code_of([] { load_table("a\n\"open\n", "t"); }), ErrorCode::MalformedCsv);
    EXPECT_EQ(code_of([] { load_table("a\n\"x\"y\n", "t"); }), ErrorCode::MalformedCsv);
}

TEST(LoadTable, FileNamedByStem) {
    testutil::TempDir dir;
    testutil::write_text(dir / "hospital.csv", "a\n1\n");
    Table t = load_table_file(dir / "hospital.csv");
    EXPECT_EQ(t.name(), "hospital");
}

// Random tables written by an independent writer must load back cell for cell,
// and the independent reader must agree with the loader.
TEST(LoadTable, RoundTripAgainstOracle) {
    std::mt19937_64 gen(7);
    const std::string alphabet = "ab ,\"\n\r:x\xC3\xA9";
    for (int iter = 0; iter < 300; ++iter) {
        std::size_t cols = 1 + gen() % 4, rows = gen() % 6;
        std::vector<std::vector<std::string>> grid;
        std::vector<std::string> header;
        for (std::size_t c = 0; c < cols; ++c) header.push_back("h" + std::to_string(c));
        grid.push_back(header);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<std::string> row;
            for (std::size_t c = 0; c < cols; ++c) {
                std::string v;
                std::size_t len = 1 + gen() % 6;
                for (std::size_t i = 0; i < len; ++i) v += alphabet[gen() % alphabet.size()];
                row.push_back(v);
            }
            grid.push_back(row);
        }
        const std::string eol = iter % 2 ? "\r\n" : "\n";
        const std::string csv = oracle::write_csv(grid, eol);
        Table t = load_table(csv, "t");
        ASSERT_EQ(t.row_count(), rows);
        auto back = oracle::read_csv(csv);
        ASSERT_EQ(back.size(), rows + 1);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                ASSERT_EQ(t.records()[r].cells[c].text(), grid[r + 1][c]);
                ASSERT_EQ(back[r + 1][c], grid[r + 1][c]);
            }
    }
}

TEST(Table, Lookups) {
    Table t = load_table(kRestaurantCsv, "restaurant");
    EXPECT_EQ(code_of([&] { t.cell(0, "zip"); }), ErrorCode::UnknownAttribute);
    EXPECT_EQ(code_of([&] { t.record(5); }), ErrorCode::RowOutOfRange);
    EXPECT_EQ(t.attribute_names(), (std::vector<std::string>{"name", "addr", "phone", "type", "city"}));
}

TEST(DataLake, AddAndFind) {
    DataLake lake;
    lake.add(load_table("a\n1\n", "t"));
    EXPECT_NE(lake.find("t"), nullptr);
    EXPECT_EQ(lake.find("u"), nullptr);
    EXPECT_EQ(code_of([&] { lake.add(load_table("a\n", "t")); }), ErrorCode::DuplicateTable);
    EXPECT_EQ(code_of([&] { lake.table("u"); }), ErrorCode::UnknownTable);
}

TEST(MaskCells, FullMask) {
    Table t = numbers_table(5);
    auto [masked, truth] = mask_cells(t, "city", 1.0, 3);
    EXPECT_EQ(truth.entries.size(), 5u);
    for (std::size_t r = 0; r < 5; ++r) {
        EXPECT_TRUE(masked.cell(r, "city").is_missing());
        EXPECT_EQ(truth.entries.at(CellKey{"numbers", r, "city"}), "c" + std::to_string(r));
    }
    // input untouched
    EXPECT_TRUE(t.cell(0, "city").is_present());
}

TEST(MaskCells, FractionRoundsUp) {
    Table t = numbers_table(10);
    auto [masked, truth] = mask_cells(t, "city", 0.4, 11);
    EXPECT_EQ(truth.entries.size(), 4u);
    std::size_t missing = 0;
    for (const auto& r : masked.records()) missing += r.cells[1].is_missing();
    EXPECT_EQ(missing, 4u);
    EXPECT_EQ(mask_cells(t, "city", 0.01, 11).second.entries.size(), 1u);
    EXPECT_EQ(mask_cells(t, "city", 0.35, 11).second.entries.size(), 4u);
}

TEST(MaskCells, Deterministic) {
    Table t = numbers_table(30);
    auto a = mask_cells(t, "city", 0.3, 99);
    auto b = mask_cells(t, "city", 0.3, 99);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second.entries, b.second.entries);
}

TEST(MaskCells, Errors) {
    Table t = load_table("a,b\n1,\n", "t");
    EXPECT_EQ(code_of([&] { mask_cells(t, "b", 1.0, 0); }), ErrorCode::NoMaskableCells);
    EXPECT_EQ(code_of([&] { mask_cells(t, "a", 0.0, 0); }), ErrorCode::InvalidTask);
    EXPECT_EQ(code_of([&] { mask_cells(t, "a", 1.5, 0); }), ErrorCode::InvalidTask);
    EXPECT_EQ(code_of([&] { mask_cells(t, "zz", 1.0, 0); }), ErrorCode::UnknownAttribute);
}

TEST(SampleRecords, Basics) {
    Table t = numbers_table(10);
    EXPECT_TRUE(sample_records(t, 0, 1).empty());
    auto all = sample_records(t, 50, 1);
    ASSERT_EQ(all.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i].index, i);

    auto a = sample_records(t, 3, 42), b = sample_records(t, 3, 42);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(a, b);
    EXPECT_LT(a[0].index, a[1].index);
    EXPECT_LT(a[1].index, a[2].index);
}

TEST(SampleRecords, ExcludeAndSpread) {
    Table t = numbers_table(10);
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        for (const auto& r : sample_records(t, 4, seed, {2, 5})) {
            EXPECT_NE(r.index, 2u);
            EXPECT_NE(r.index, 5u);
            seen.insert(r.index);
        }
    }
    EXPECT_EQ(seen.size(), 8u);
    EXPECT_EQ(sample_records(t, 50, 0, {0, 1}).size(), 8u);
}

TEST(Rng, SubsetIsUniformEnough) {
    std::vector<int> pop(6);
    for (int i = 0; i < 6; ++i) pop[i] = i;
    std::vector<int> hits(6, 0);
    for (std::uint64_t s = 0; s < 6000; ++s)
        for (int v : seeded_subset(pop, 2, s)) ++hits[v];
    for (int h : hits) {
        EXPECT_GT(h, 1700);
        EXPECT_LT(h, 2300);
    }
}
