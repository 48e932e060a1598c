// camera.hpp — orbital camera pose: azimuth/elevation/distance around the
// mesh centroid plus pinhole intrinsics.
#pragma once

namespace fca {

// Conventions (right-handed):
// - World up is +z. Azimuth 0 puts the camera on the +x axis, growing
//   counterclockwise when seen from above. Elevation is degrees above the
//   horizontal plane; 90 is straight down (there the image "up" direction
//   is world +x, so the vehicle length axis maps to image vertical).
// - fov is the vertical field of view; pixels are square.
struct CameraPose {
    double azimuth_deg = 0.0;    // [0, 360)
    double elevation_deg = 0.0;  // [0, 90]
    double distance = 5.0;       // model units, > 0
    double fov_deg = 45.0;       // (0, 180)
    int image_h = 416;
    int image_w = 416;
};

}  // namespace fca
