#pragma once

#include "nmem/engine.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace nmem {

struct PlotPoint {
    std::string trace_id;
    double x = 0.0;
    double y = 0.0;
    int topic_id = 0;
    std::string thread_id;
};

struct ClusterPlot {
    std::string user_id;
    std::vector<PlotPoint> points;
};

// 2-D PCA projection of a user's trace embeddings, labelled by topic and thread.
ClusterPlot project_clusters(const std::string& user_id, const UserClusters& clusters, const VectorIndex& index);

nlohmann::json to_json(const ClusterPlot& plot);

// Static SVG: per-topic Gaussian density shading with the points on top.
std::string render_density_svg(const ClusterPlot& plot, int size_px = 640);

} // namespace nmem
