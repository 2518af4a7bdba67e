#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dglab/errors.hpp"

namespace dglab {

// A set of points with class and domain labels. Domain labels identify
// which distribution a point was drawn from; they are assigned when the
// batch is built and there is deliberately no way to change them afterwards.
// Cooperative updates move points, never their labels.
class LabeledBatch {
public:
    LabeledBatch(std::vector<std::vector<double>> points, std::vector<int> class_labels,
                 std::vector<int> domain_labels)
        : points_(std::move(points)),
          class_labels_(std::move(class_labels)),
          domain_labels_(std::move(domain_labels)) {
        if (points_.empty()) throw InvalidInputError("labeled batch must be nonempty");
        if (class_labels_.size() != points_.size() || domain_labels_.size() != points_.size())
            throw InvalidInputError("labeled batch needs one class and one domain per point");
        const std::size_t dim = points_.front().size();
        if (dim == 0) throw InvalidInputError("labeled batch points need a dimension");
        for (const auto& p : points_)
            if (p.size() != dim)
                throw InvalidInputError("labeled batch points must share a dimension");
        for (int c : class_labels_)
            if (c < 0) throw InvalidInputError("class labels must be nonnegative");
        for (int d : domain_labels_)
            if (d < 0) throw InvalidInputError("domain labels must be nonnegative");
    }

    const std::vector<std::vector<double>>& points() const { return points_; }
    const std::vector<int>& class_labels() const { return class_labels_; }
    const std::vector<int>& domain_labels() const { return domain_labels_; }

    std::size_t size() const { return points_.size(); }
    std::size_t dim() const { return points_.front().size(); }

    const std::vector<double>& point(std::size_t i) const { return points_[i]; }
    int class_label(std::size_t i) const { return class_labels_[i]; }
    int domain_label(std::size_t i) const { return domain_labels_[i]; }

    // New batch holding the selected rows, labels carried along unchanged.
    LabeledBatch select(std::span<const std::size_t> indices) const {
        std::vector<std::vector<double>> pts;
        std::vector<int> cls, dom;
        pts.reserve(indices.size());
        cls.reserve(indices.size());
        dom.reserve(indices.size());
        for (std::size_t i : indices) {
            if (i >= size()) throw InvalidInputError("labeled batch: index out of range");
            pts.push_back(points_[i]);
            cls.push_back(class_labels_[i]);
            dom.push_back(domain_labels_[i]);
        }
        return LabeledBatch(std::move(pts), std::move(cls), std::move(dom));
    }

private:
    std::vector<std::vector<double>> points_;
    std::vector<int> class_labels_;
    std::vector<int> domain_labels_;
};

}  // namespace dglab
