#pragma once

#include "vistune/core.hpp"
#include "vistune/distance.hpp"
#include "vistune/metrics.hpp"
#include "vistune/report_json.hpp"
#include "vistune/hierarchy.hpp"
#include "vistune/pca.hpp"
#include "vistune/tsne.hpp"
#include "vistune/dr_config.hpp"
#include "vistune/process.hpp"
#include "vistune/csv.hpp"
#include "vistune/backend.hpp"
#include "vistune/embedding.hpp"
#include "vistune/composite.hpp"
#include "vistune/diagnostic.hpp"
#include "vistune/prompt.hpp"
#include "vistune/agent.hpp"
#include "vistune/mock_agent.hpp"
#include "vistune/llm_agent.hpp"
#include "vistune/render.hpp"
#include "vistune/pipeline.hpp"
#include "vistune/synthetic.hpp"
