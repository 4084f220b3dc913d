#include "rrgs/image.hpp"

#include <cmath>

namespace rrgs {

double psnr(const Image& a, const Image& b) {
    if (!a.same_size(b))
        throw InvalidParameterError("psnr: image dimensions differ");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse < 1e-30) return 300.0;
    return -10.0 * std::log10(mse);
}

}  // namespace rrgs
