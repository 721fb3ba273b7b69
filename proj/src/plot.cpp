#include "nmem/plot.hpp"

#include "nmem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace nmem {

using nlohmann::json;

ClusterPlot project_clusters(const std::string& user_id, const UserClusters& clusters, const VectorIndex& index) {
    ClusterPlot plot;
    plot.user_id = user_id;
    std::map<std::string, std::string> thread_of;
    for (const auto& th : clusters.threads) {
        for (const auto& id : th.trace_ids) thread_of[id] = th.thread_id;
    }
    std::vector<std::string> ids;
    std::vector<int> topics;
    for (const auto& t : clusters.topics) {
        for (const auto& id : t.trace_ids) {
            ids.push_back(id);
            topics.push_back(t.topic_id);
        }
    }
    if (ids.empty()) return plot;
    const auto fetched = index.fetch(Namespace::Trace, ids);
    fetched.require();

    cluster::Matrix X(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(index.dimension()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t d = 0; d < index.dimension(); ++d) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = fetched.records[i].vector[d];
        }
    }
    cluster::Matrix coords = cluster::Matrix::Zero(X.rows(), 2);
    try {
        const auto pca = cluster::fit_pca(X, 1.0);
        const auto cols = std::min<Eigen::Index>(2, pca.reduced.cols());
        coords.leftCols(cols) = pca.reduced.leftCols(cols);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        plot.points.push_back({ids[i], coords(r, 0), coords(r, 1), topics[i], thread_of[ids[i]]});
    }
    return plot;
}

json to_json(const ClusterPlot& plot) {
    json points = json::array();
    for (const auto& p : plot.points) {
        points.push_back({{"trace_id", p.trace_id}, {"x", p.x}, {"y", p.y}, {"topic_id", p.topic_id}, {"thread_id", p.thread_id}});
    }
    return {{"user_id", plot.user_id}, {"projection", "pca-2d"}, {"points", std::move(points)}};
}

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_density_svg(const ClusterPlot& plot, int size_px) {
    const double size = static_cast<double>(size_px);
    const double margin = 40.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\"" << size_px
        << "\" viewBox=\"0 0 " << size_px << " " << size_px << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape_xml(plot.user_id) << ": trace clusters</text>\n";
    if (plot.points.empty()) {
        svg << "</svg>\n";
        return svg.str();
    }

    double xmin = plot.points.front().x, xmax = xmin, ymin = plot.points.front().y, ymax = ymin;
    for (const auto& p : plot.points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
    const double pad = 0.15 * span;
    xmin -= pad;
    ymin -= pad;
    const double extent = span + 2 * pad;
    const double inner = size - 2 * margin;
    auto sx = [&](double x) { return margin + (x - xmin) / extent * inner; };
    auto sy = [&](double y) { return size - margin - (y - ymin) / extent * inner; };

    // Silverman-style bandwidth over the whole cloud.
    const double n = static_cast<double>(plot.points.size());
    const double bandwidth = std::max(0.05 * span, 1.06 * (span / 4.0) * std::pow(n, -0.2));
    constexpr int kGrid = 48;
    const double cell = inner / kGrid;

    std::map<int, std::vector<const PlotPoint*>> by_topic;
    for (const auto& p : plot.points) by_topic[p.topic_id].push_back(&p);
    for (const auto& [topic, pts] : by_topic) {
        const char* color = kPalette[static_cast<std::size_t>(topic) % std::size(kPalette)];
        std::vector<double> density(kGrid * kGrid, 0.0);
        double peak = 0.0;
        for (int gy = 0; gy < kGrid; ++gy) {
            for (int gx = 0; gx < kGrid; ++gx) {
                const double x = xmin + (gx + 0.5) / kGrid * extent;
                const double y = ymin + (gy + 0.5) / kGrid * extent;
                double d = 0.0;
                for (const auto* p : pts) {
                    const double dx = (x - p->x) / bandwidth;
                    const double dy = (y - p->y) / bandwidth;
                    d += std::exp(-0.5 * (dx * dx + dy * dy));
                }
                density[static_cast<std::size_t>(gy * kGrid + gx)] = d;
                peak = std::max(peak, d);
            }
        }
        svg << "<g fill=\"" << color << "\">\n";
        for (int gy = 0; gy < kGrid; ++gy) {
            for (int gx = 0; gx < kGrid; ++gx) {
                const double level = peak > 0 ? density[static_cast<std::size_t>(gy * kGrid + gx)] / peak : 0.0;
                if (level < 0.05) continue;
                // Quantized levels give contour-like bands.
                const double band = std::ceil(level * 6.0) / 6.0;
                svg << "<rect x=\"" << margin + gx * cell << "\" y=\"" << size - margin - (gy + 1) * cell
                    << "\" width=\"" << cell + 0.5 << "\" height=\"" << cell + 0.5 << "\" fill-opacity=\""
                    << 0.45 * band << "\"/>\n";
            }
        }
        svg << "</g>\n";
    }
    for (const auto& p : plot.points) {
        const char* color = kPalette[static_cast<std::size_t>(p.topic_id) % std::size(kPalette)];
        svg << "<circle cx=\"" << sx(p.x) << "\" cy=\"" << sy(p.y) << "\" r=\"3.5\" fill=\"" << color
            << "\" stroke=\"black\" stroke-width=\"0.5\"><title>" << escape_xml(p.trace_id) << "</title></circle>\n";
    }
    double ly = margin;
    for (const auto& [topic, pts] : by_topic) {
        const char* color = kPalette[static_cast<std::size_t>(topic) % std::size(kPalette)];
        svg << "<rect x=\"" << size - 120 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>"
            << "<text x=\"" << size - 105 << "\" y=\"" << ly + 9 << "\" font-family=\"sans-serif\" font-size=\"11\">topic "
            << topic << " (" << pts.size() << ")</text>\n";
        ly += 16;
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace nmem
