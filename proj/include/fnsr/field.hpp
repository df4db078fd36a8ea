#pragma once

#include <Eigen/Core>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <fnsr/fft.hpp>
#include <fnsr/grid.hpp>

namespace fnsr {

// Scalar field on a TorusGrid. Values are authoritative; the spectrum is a
// lazily computed cache shared across copies. Fields are value types and are
// never mutated in place after construction.
class TorusField {
public:
    TorusField() : grid_(2, 4), values_(Eigen::ArrayXd::Zero(16)) {}

    TorusField(TorusGrid g, Eigen::ArrayXd values)
        : grid_(g), values_(std::move(values)), cache_(std::make_shared<Cache>()) {
        if (values_.size() != grid_.size())
            throw std::invalid_argument("TorusField: value count does not match grid");
    }

    static TorusField zero(const TorusGrid& g) {
        return TorusField(g, Eigen::ArrayXd::Zero(g.size()));
    }

    static TorusField from_spectrum(const TorusGrid& g, const Eigen::ArrayXcd& coef) {
        TorusField f(g, dft_inverse_real(g, coef));
        f.cache_->spec = coef;
        f.cache_->ready = true;
        return f;
    }

    const TorusGrid& grid() const { return grid_; }
    const Eigen::ArrayXd& values() const { return values_; }
    double mean() const { return values_.mean(); }

    const Eigen::ArrayXcd& spectrum() const {
        std::lock_guard<std::mutex> lk(cache_->mu);
        if (!cache_->ready) {
            cache_->spec = dft_forward(grid_, values_);
            cache_->ready = true;
        }
        return cache_->spec;
    }

private:
    struct Cache {
        std::mutex mu;
        bool ready = false;
        Eigen::ArrayXcd spec;
    };

    TorusGrid grid_;
    Eigen::ArrayXd values_;
    std::shared_ptr<Cache> cache_;
};

inline TorusField operator+(const TorusField& a, const TorusField& b) {
    return TorusField(a.grid(), a.values() + b.values());
}
inline TorusField operator-(const TorusField& a, const TorusField& b) {
    return TorusField(a.grid(), a.values() - b.values());
}
inline TorusField operator*(const TorusField& a, const TorusField& b) {
    return TorusField(a.grid(), a.values() * b.values());
}
inline TorusField operator*(double s, const TorusField& a) {
    return TorusField(a.grid(), s * a.values());
}
inline TorusField operator-(const TorusField& a) {
    return TorusField(a.grid(), -a.values());
}

// Vector field: d scalar components.
class TorusVectorField {
public:
    explicit TorusVectorField(const TorusGrid& g) : grid_(g) {
        comps_.reserve(g.d);
        for (int i = 0; i < g.d; ++i) comps_.push_back(TorusField::zero(g));
    }

    const TorusGrid& grid() const { return grid_; }
    TorusField& operator[](int i) { return comps_[i]; }
    const TorusField& operator[](int i) const { return comps_[i]; }
    const TorusField& comp(int i) const { return comps_[i]; }

private:
    TorusGrid grid_;
    std::vector<TorusField> comps_;
};

// Rank-two tensor field, components row-major: entry(i, j) = comps[i*d + j].
class TorusTensorField {
public:
    explicit TorusTensorField(const TorusGrid& g) : grid_(g) {
        comps_.reserve(std::size_t(g.d) * g.d);
        for (int i = 0; i < g.d * g.d; ++i) comps_.push_back(TorusField::zero(g));
    }

    const TorusGrid& grid() const { return grid_; }
    TorusField& operator()(int i, int j) { return comps_[std::size_t(i) * grid_.d + j]; }
    const TorusField& operator()(int i, int j) const {
        return comps_[std::size_t(i) * grid_.d + j];
    }

private:
    TorusGrid grid_;
    std::vector<TorusField> comps_;
};

} // namespace fnsr
