#pragma once

#include <filesystem>
#include <string>

#include "support/tempdir.hpp"
#include "unidm/datalake.hpp"
#include "unidm/llmclient.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return UNIDM_TEST_DATA; }

/// The committed case-study restaurant table (row 7 has no city).
inline unidm::Table case_study_table() {
    return unidm::load_table_file(data_dir() / "case_study" / "restaurant.csv");
}

inline std::vector<unidm::MockRule> case_study_rules() {
    return unidm::load_mock_script(data_dir() / "case_study" / "mock.jsonl");
}

} // namespace testutil
