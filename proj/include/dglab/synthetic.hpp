#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dglab/batch.hpp"
#include "dglab/errors.hpp"
#include "dglab/histogram.hpp"
#include "dglab/io.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// ============================================================================
// Synthetic multi-domain classification tasks. Every family applies a
// per-domain covariate transform to a shared base distribution, so the label
// rule is the same across domains once the transform is undone.
// ============================================================================

enum class DomainKind { rotated_gaussians, shifted_uniform, two_moons };

inline const char* to_string(DomainKind k) {
    switch (k) {
        case DomainKind::rotated_gaussians: return "rotated-gaussians";
        case DomainKind::shifted_uniform: return "shifted-uniform";
        case DomainKind::two_moons: return "two-moons";
    }
    throw InvalidInputError("unknown domain kind");
}

inline DomainKind domain_kind_from_string(const std::string& s) {
    if (s == "rotated-gaussians") return DomainKind::rotated_gaussians;
    if (s == "shifted-uniform") return DomainKind::shifted_uniform;
    if (s == "two-moons") return DomainKind::two_moons;
    throw ParseError("unknown domain kind: " + s);
}

struct DomainSpec {
    DomainKind kind = DomainKind::rotated_gaussians;
    double transform = 0.0;  // rotation angle in degrees, or shift offset
    int classes = 3;
    int points_per_class = 100;
    double noise = 0.3;

    void validate() const {
        if (classes < 2) throw InvalidInputError("domain spec: need >= 2 classes");
        if (kind == DomainKind::two_moons && classes != 2)
            throw InvalidInputError("domain spec: two-moons is a 2-class family");
        if (points_per_class < 1)
            throw InvalidInputError("domain spec: need >= 1 point per class");
        if (!(noise >= 0.0) || !std::isfinite(noise))
            throw InvalidInputError("domain spec: noise must be >= 0");
        if (!std::isfinite(transform))
            throw InvalidInputError("domain spec: transform must be finite");
    }

    std::size_t feature_dim() const { return kind == DomainKind::shifted_uniform ? 1 : 2; }
};

inline void to_json(nlohmann::json& j, const DomainSpec& s) {
    j = nlohmann::json{{"kind", to_string(s.kind)},
                       {"transform", s.transform},
                       {"classes", s.classes},
                       {"points_per_class", s.points_per_class},
                       {"noise", s.noise}};
}

inline void from_json(const nlohmann::json& j, DomainSpec& s) {
    s.kind = domain_kind_from_string(j.at("kind").get<std::string>());
    s.transform = j.at("transform").get<double>();
    s.classes = j.at("classes").get<int>();
    s.points_per_class = j.at("points_per_class").get<int>();
    s.noise = j.at("noise").get<double>();
}

inline std::pair<double, double> rotate_point(double x, double y, double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    return {x * c - y * s, x * s + y * c};
}

// One domain's sample. Class blocks are emitted in order, so the class
// balance is exact; trainers shuffle per epoch anyway.
inline LabeledBatch generate_domain(const DomainSpec& spec, int domain_label, Rng& rng) {
    spec.validate();
    std::vector<std::vector<double>> points;
    std::vector<int> classes, domains;
    const std::size_t total =
        static_cast<std::size_t>(spec.classes) * static_cast<std::size_t>(spec.points_per_class);
    points.reserve(total);
    classes.reserve(total);
    domains.reserve(total);

    for (int c = 0; c < spec.classes; ++c) {
        for (int i = 0; i < spec.points_per_class; ++i) {
            switch (spec.kind) {
                case DomainKind::rotated_gaussians: {
                    // Class centers sit on a circle of radius 2; the domain
                    // rotates the whole picture about the origin.
                    const double angle =
                        2.0 * 3.14159265358979323846 * static_cast<double>(c) /
                        static_cast<double>(spec.classes);
                    auto [cx, cy] = rotate_point(2.0 * std::cos(angle), 2.0 * std::sin(angle),
                                                 spec.transform);
                    points.push_back({cx + spec.noise * rng.normal(),
                                      cy + spec.noise * rng.normal()});
                    break;
                }
                case DomainKind::shifted_uniform: {
                    // Class c lives on [2c, 2c+1]; the domain shifts the line.
                    const double x = 2.0 * static_cast<double>(c) + rng.uniform() +
                                     spec.transform + spec.noise * rng.normal();
                    points.push_back({x});
                    break;
                }
                case DomainKind::two_moons: {
                    const double t = rng.uniform() * 3.14159265358979323846;
                    double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
                    double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
                    x += spec.noise * rng.normal();
                    y += spec.noise * rng.normal();
                    auto [rx, ry] = rotate_point(x, y, spec.transform);
                    points.push_back({rx, ry});
                    break;
                }
            }
            classes.push_back(c);
            domains.push_back(domain_label);
        }
    }
    return LabeledBatch(std::move(points), std::move(classes), std::move(domains));
}

// A full task: k source domains plus one held-out target domain. The last
// spec in the list is the target.
struct BenchmarkTask {
    std::vector<DomainSpec> specs;  // sources first, target last
    std::vector<LabeledBatch> sources;
    LabeledBatch target;
    std::uint64_t seed = 0;

    std::size_t source_count() const { return sources.size(); }
};

inline BenchmarkTask generate_benchmark(std::vector<DomainSpec> specs, std::uint64_t seed) {
    if (specs.size() < 3)
        throw InvalidInputError("benchmark: need >= 2 sources plus a target spec");
    for (const auto& s : specs) {
        s.validate();
        if (s.kind != specs.front().kind || s.classes != specs.front().classes)
            throw InvalidInputError("benchmark: domains must share kind and class count");
    }
    for (std::size_t i = 0; i < specs.size(); ++i)
        for (std::size_t j = i + 1; j < specs.size(); ++j)
            if (specs[i].transform == specs[j].transform)
                throw InvalidInputError(
                    "benchmark: duplicate transform values; domains must be distinct");

    const Rng root(seed);
    std::vector<LabeledBatch> sources;
    sources.reserve(specs.size() - 1);
    for (std::size_t d = 0; d + 1 < specs.size(); ++d) {
        Rng domain_rng = root.fork(d + 1);
        sources.push_back(generate_domain(specs[d], static_cast<int>(d), domain_rng));
    }
    Rng target_rng = root.fork(specs.size());
    LabeledBatch target =
        generate_domain(specs.back(), static_cast<int>(specs.size() - 1), target_rng);
    return BenchmarkTask{std::move(specs), std::move(sources), std::move(target), seed};
}

// Default task used by the CLI and the experiment suites: three rotated
// Gaussian sources and a further-rotated target.
inline std::vector<DomainSpec> default_benchmark_specs() {
    std::vector<DomainSpec> specs;
    for (double angle : {0.0, 15.0, 30.0, 45.0}) {
        DomainSpec s;
        s.kind = DomainKind::rotated_gaussians;
        s.transform = angle;
        s.classes = 3;
        s.points_per_class = 100;
        s.noise = 0.55;
        specs.push_back(s);
    }
    return specs;
}

// ============================================================================
// Worked histogram fixtures for the geometry: the disjoint uniform pair with
// a straddling third distribution, and an overlapping pair for which a
// far-away candidate falsifies the admissibility condition.
// ============================================================================

struct WorkedGeometryFixture {
    SourceCollection sources;
    HistogramDistribution straddling;     // within the worked bound's reach
    HistogramDistribution far_candidate;  // disjoint from everything
};

// U(0,2) and U(2,4) on the unit grid over [-1, 5], the straddling U(1,3),
// and the far-away U(10,12). The pairwise radius is 2, the largest value
// possible, so the far candidate still satisfies the admissibility
// inequality with zero slack; falsification needs the overlapping fixture.
inline WorkedGeometryFixture worked_uniform_fixture() {
    std::vector<double> unit_grid;
    for (int e = -1; e <= 5; ++e) unit_grid.push_back(static_cast<double>(e));
    return WorkedGeometryFixture{
        SourceCollection({regrid(HistogramDistribution::uniform(0.0, 2.0), unit_grid),
                          regrid(HistogramDistribution::uniform(2.0, 4.0), unit_grid)},
                         {0.5, 0.5}),
        HistogramDistribution::uniform(1.0, 3.0),
        HistogramDistribution::uniform(10.0, 12.0)};
}

// Overlapping sources U(0,2) and U(1,3): the pairwise radius drops to 1 and
// the far candidate violates the admissibility inequality at every
// weighting.
inline WorkedGeometryFixture overlapping_uniform_fixture() {
    return WorkedGeometryFixture{
        SourceCollection({HistogramDistribution::uniform(0.0, 2.0),
                          HistogramDistribution::uniform(1.0, 3.0)},
                         {0.5, 0.5}),
        HistogramDistribution::uniform(0.5, 2.5),
        HistogramDistribution::uniform(10.0, 12.0)};
}

// ============================================================================
// Dataset files: a tagged JSON header line, a CSV column header, then one
// row per point. Doubles are written round-trip exactly, so write -> read ->
// write reproduces the file byte for byte.
// ============================================================================

inline constexpr const char* k_dataset_tag = "#dglab-dataset v1 ";

inline std::string dataset_to_text(const BenchmarkTask& task) {
    std::ostringstream out;
    const nlohmann::json header{{"seed", task.seed}, {"specs", task.specs}};
    out << k_dataset_tag << header.dump() << "\n";

    const std::size_t dim = task.target.dim();
    out << "domain,class";
    for (std::size_t f = 0; f < dim; ++f) out << ",x" << f;
    out << "\n";

    const auto write_batch = [&](const LabeledBatch& batch) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out << batch.domain_label(i) << "," << batch.class_label(i);
            for (double v : batch.point(i)) out << "," << format_double(v);
            out << "\n";
        }
    };
    for (const auto& s : task.sources) write_batch(s);
    write_batch(task.target);
    return out.str();
}

inline void write_dataset(const std::filesystem::path& path, const BenchmarkTask& task) {
    write_text_file(path, dataset_to_text(task));
}

inline BenchmarkTask dataset_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind(k_dataset_tag, 0) != 0)
        throw ParseError("dataset: missing header tag");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line.substr(std::string(k_dataset_tag).size()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset: bad header json: ") + e.what());
    }
    std::uint64_t seed = 0;
    std::vector<DomainSpec> specs;
    try {
        seed = header.at("seed").get<std::uint64_t>();
        specs = header.at("specs").get<std::vector<DomainSpec>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset: bad header fields: ") + e.what());
    }
    if (specs.size() < 3) throw ParseError("dataset: need >= 2 sources plus a target");

    if (!std::getline(in, line) || line.rfind("domain,class", 0) != 0)
        throw ParseError("dataset: missing column header");

    struct Rows {
        std::vector<std::vector<double>> points;
        std::vector<int> classes;
        std::vector<int> domains;
    };
    std::map<int, Rows> by_domain;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3)
            throw ParseError("dataset: short row at line " + std::to_string(line_no));
        try {
            const int domain = std::stoi(cells[0]);
            const int cls = std::stoi(cells[1]);
            std::vector<double> point;
            point.reserve(cells.size() - 2);
            for (std::size_t i = 2; i < cells.size(); ++i) point.push_back(std::stod(cells[i]));
            auto& rows = by_domain[domain];
            rows.points.push_back(std::move(point));
            rows.classes.push_back(cls);
            rows.domains.push_back(domain);
        } catch (const std::exception&) {
            throw ParseError("dataset: bad row at line " + std::to_string(line_no));
        }
    }

    if (by_domain.size() != specs.size())
        throw ParseError("dataset: row domains do not match the header specs");
    std::vector<LabeledBatch> batches;
    for (std::size_t d = 0; d < specs.size(); ++d) {
        const auto it = by_domain.find(static_cast<int>(d));
        if (it == by_domain.end())
            throw ParseError("dataset: missing rows for domain " + std::to_string(d));
        batches.emplace_back(std::move(it->second.points), std::move(it->second.classes),
                             std::move(it->second.domains));
    }

    LabeledBatch target = std::move(batches.back());
    batches.pop_back();
    return BenchmarkTask{std::move(specs), std::move(batches), std::move(target), seed};
}

inline BenchmarkTask read_dataset(const std::filesystem::path& path) {
    return dataset_from_text(read_text_file(path));
}

}  // namespace dglab
