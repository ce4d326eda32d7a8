//! Filter taps for the shipped DTCWT filter sets, in the standard published
//! normalization (level-1 lowpass filters sum to one).

pub(crate) const ANTONINI_H0O: [f64; 9] = [
    0.026748757410810106,
    -0.01686411844287467,
    -0.07822326652899052,
    0.2668641184428729,
    0.6029490182363593,
    0.2668641184428769,
    -0.0782232665289884,
    -0.016864118442875293,
    0.026748757410809648,
];

pub(crate) const ANTONINI_G0O: [f64; 7] = [
    -0.04563588155712514,
    -0.02877176311424934,
    0.295635881557128,
    0.5575435262285023,
    0.29563588155712334,
    -0.02877176311425308,
    -0.04563588155712608,
];

pub(crate) const ANTONINI_H1O: [f64; 7] = [
    0.04563588155712514,
    -0.02877176311424934,
    -0.295635881557128,
    0.5575435262285023,
    -0.29563588155712334,
    -0.02877176311425308,
    0.04563588155712608,
];

pub(crate) const ANTONINI_G1O: [f64; 9] = [
    0.026748757410810106,
    0.01686411844287467,
    -0.07822326652899052,
    -0.2668641184428729,
    0.6029490182363593,
    -0.2668641184428769,
    -0.0782232665289884,
    0.016864118442875293,
    0.026748757410809648,
];

pub(crate) const LEGALL_H0O: [f64; 5] = [-0.125, 0.25, 0.75, 0.25, -0.125];

pub(crate) const LEGALL_G0O: [f64; 3] = [0.25, 0.5, 0.25];

pub(crate) const LEGALL_H1O: [f64; 3] = [-0.25, 0.5, -0.25];

pub(crate) const LEGALL_G1O: [f64; 5] = [-0.125, -0.25, 0.75, -0.25, -0.125];

pub(crate) const NEAR_SYM_A_H0O: [f64; 5] = [-0.05, 0.25, 0.6, 0.25, -0.05];

pub(crate) const NEAR_SYM_A_G0O: [f64; 7] = [
    -0.010714285714285713,
    -0.05357142857142857,
    0.26071428571428573,
    0.6071428571428571,
    0.26071428571428573,
    -0.05357142857142857,
    -0.010714285714285713,
];

pub(crate) const NEAR_SYM_A_H1O: [f64; 7] = [
    0.010714285714285713,
    -0.05357142857142857,
    -0.26071428571428573,
    0.6071428571428571,
    -0.26071428571428573,
    -0.05357142857142857,
    0.010714285714285713,
];

pub(crate) const NEAR_SYM_A_G1O: [f64; 5] = [-0.05, -0.25, 0.6, -0.25, -0.05];

pub(crate) const NEAR_SYM_B_H0O: [f64; 13] = [
    -0.0017578125,
    0.0,
    0.022265625,
    -0.046875,
    -0.0482421875,
    0.296875,
    0.55546875,
    0.296875,
    -0.0482421875,
    -0.046875,
    0.022265625,
    0.0,
    -0.0017578125,
];

pub(crate) const NEAR_SYM_B_G0O: [f64; 19] = [
    7.062639508928571e-05,
    0.0,
    -0.0013419015066964285,
    -0.0018833705357142855,
    0.007156808035714285,
    0.023856026785714284,
    -0.05564313616071428,
    -0.05168805803571428,
    0.29975760323660716,
    0.5594308035714286,
    0.29975760323660716,
    -0.05168805803571428,
    -0.05564313616071428,
    0.023856026785714284,
    0.007156808035714285,
    -0.0018833705357142855,
    -0.0013419015066964285,
    0.0,
    7.062639508928571e-05,
];

pub(crate) const NEAR_SYM_B_H1O: [f64; 19] = [
    -7.062639508928571e-05,
    0.0,
    0.0013419015066964285,
    -0.0018833705357142855,
    -0.007156808035714285,
    0.023856026785714284,
    0.05564313616071428,
    -0.05168805803571428,
    -0.29975760323660716,
    0.5594308035714286,
    -0.29975760323660716,
    -0.05168805803571428,
    0.05564313616071428,
    0.023856026785714284,
    -0.007156808035714285,
    -0.0018833705357142855,
    0.0013419015066964285,
    0.0,
    -7.062639508928571e-05,
];

pub(crate) const NEAR_SYM_B_G1O: [f64; 13] = [
    -0.0017578125,
    -0.0,
    0.022265625,
    0.046875,
    -0.0482421875,
    -0.296875,
    0.55546875,
    -0.296875,
    -0.0482421875,
    0.046875,
    0.022265625,
    -0.0,
    -0.0017578125,
];

pub(crate) const QSHIFT_B_H0A: [f64; 14] = [
    0.003253142763653182,
    -0.00388321199915849,
    0.03466034684485349,
    -0.03887280126882779,
    -0.11720388769911527,
    0.27529538466888204,
    0.7561456438925225,
    0.5688104207121227,
    0.011866092033797,
    -0.1067118046866654,
    0.023825384794920298,
    0.01702522388155399,
    -0.005439475937274115,
    -0.004556895628475491,
];

pub(crate) const QSHIFT_B_H0B: [f64; 14] = [
    -0.004556895628475491,
    -0.005439475937274115,
    0.01702522388155399,
    0.023825384794920298,
    -0.1067118046866654,
    0.011866092033797,
    0.5688104207121227,
    0.7561456438925225,
    0.27529538466888204,
    -0.11720388769911527,
    -0.03887280126882779,
    0.03466034684485349,
    -0.00388321199915849,
    0.003253142763653182,
];

pub(crate) const QSHIFT_B_G0A: [f64; 14] = [
    -0.004556895628475491,
    -0.005439475937274115,
    0.01702522388155399,
    0.023825384794920298,
    -0.1067118046866654,
    0.011866092033797,
    0.5688104207121227,
    0.7561456438925225,
    0.27529538466888204,
    -0.11720388769911527,
    -0.03887280126882779,
    0.03466034684485349,
    -0.00388321199915849,
    0.003253142763653182,
];

pub(crate) const QSHIFT_B_G0B: [f64; 14] = [
    0.003253142763653182,
    -0.00388321199915849,
    0.03466034684485349,
    -0.03887280126882779,
    -0.11720388769911527,
    0.27529538466888204,
    0.7561456438925225,
    0.5688104207121227,
    0.011866092033797,
    -0.1067118046866654,
    0.023825384794920298,
    0.01702522388155399,
    -0.005439475937274115,
    -0.004556895628475491,
];

pub(crate) const QSHIFT_B_H1A: [f64; 14] = [
    -0.004556895628475491,
    0.005439475937274115,
    0.01702522388155399,
    -0.023825384794920298,
    -0.1067118046866654,
    -0.011866092033797,
    0.5688104207121227,
    -0.7561456438925225,
    0.27529538466888204,
    0.11720388769911527,
    -0.03887280126882779,
    -0.03466034684485349,
    -0.00388321199915849,
    -0.003253142763653182,
];

pub(crate) const QSHIFT_B_H1B: [f64; 14] = [
    -0.003253142763653182,
    -0.00388321199915849,
    -0.03466034684485349,
    -0.03887280126882779,
    0.11720388769911527,
    0.27529538466888204,
    -0.7561456438925225,
    0.5688104207121227,
    -0.011866092033797,
    -0.1067118046866654,
    -0.023825384794920298,
    0.01702522388155399,
    0.005439475937274115,
    -0.004556895628475491,
];

pub(crate) const QSHIFT_B_G1A: [f64; 14] = [
    -0.003253142763653182,
    -0.00388321199915849,
    -0.03466034684485349,
    -0.03887280126882779,
    0.11720388769911527,
    0.27529538466888204,
    -0.7561456438925225,
    0.5688104207121227,
    -0.011866092033797,
    -0.1067118046866654,
    -0.023825384794920298,
    0.01702522388155399,
    0.005439475937274115,
    -0.004556895628475491,
];

pub(crate) const QSHIFT_B_G1B: [f64; 14] = [
    -0.004556895628475491,
    0.005439475937274115,
    0.01702522388155399,
    -0.023825384794920298,
    -0.1067118046866654,
    -0.011866092033797,
    0.5688104207121227,
    -0.7561456438925225,
    0.27529538466888204,
    0.11720388769911527,
    -0.03887280126882779,
    -0.03466034684485349,
    -0.00388321199915849,
    -0.003253142763653182,
];
