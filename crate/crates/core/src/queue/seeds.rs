//! The four starter programs: jigsaw, rotation, cropping and box drawing.

pub const JIGSAW: &str = "param n
param order
step jigsaw $n $order
args n=2, order=[3,0,1,2]
args n=2, order=[1,0,3,2]
args n=2, order=[0,3,2,1]
args n=2, order=[2,1,0,3]";

pub const ROTATION: &str = "param angle
step rotate $angle
args angle=15
args angle=45
args angle=90
args angle=180";

pub const CROPPING: &str = "param bbox_2d
step crop $bbox_2d
args bbox_2d=[205,220,335,422]
args bbox_2d=[103,94,378,210]
args bbox_2d=[452,603,565,750]
args bbox_2d=[154,752,357,958]";

pub const BOUNDING_BOX: &str = "param x0
param y0
param x1
param y1
step draw_rect $x0 $y0 $x1 $y1 5
args x0=205, y0=220, x1=335, y1=422
args x0=103, y0=94, x1=378, y1=510
args x0=452, y0=610, x1=556, y1=850
args x0=154, y0=750, x1=357, y1=958";

pub const SEEDS: [&str; 4] = [JIGSAW, ROTATION, CROPPING, BOUNDING_BOX];
