#pragma once

#include "unidm/config.hpp"
#include "unidm/context.hpp"
#include "unidm/contextparse.hpp"
#include "unidm/datalake.hpp"
#include "unidm/error.hpp"
#include "unidm/evalharness.hpp"
#include "unidm/http_backend.hpp"
#include "unidm/llmclient.hpp"
#include "unidm/pipeline.hpp"
#include "unidm/promptgen.hpp"
#include "unidm/retrieval.hpp"
#include "unidm/taskmodel.hpp"
