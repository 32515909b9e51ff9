use facegate::imageio::{
    crop, decode_netpbm, encode_pgm, encode_ppm, gray_to_rgb, luma, resize_nearest, to_grayscale, DecodedImage,
    GrayImage, NetpbmError, Rect, RgbImage,
};
use proptest::prelude::*;

fn gray_strategy(max: u32) -> impl Strategy<Value = GrayImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h) as usize).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn rgb_strategy(max: u32) -> impl Strategy<Value = RgbImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h * 3) as usize).prop_map(move |d| RgbImage::new(w, h, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pgm_round_trip(img in gray_strategy(40)) {
        let bytes = encode_pgm(&img);
        let decoded = decode_netpbm(&bytes).unwrap();
        prop_assert_eq!(decoded.encode(), bytes);
        prop_assert_eq!(decoded, DecodedImage::Gray(img));
    }

    #[test]
    fn ppm_round_trip(img in rgb_strategy(40)) {
        let bytes = encode_ppm(&img);
        let decoded = decode_netpbm(&bytes).unwrap();
        prop_assert_eq!(decoded.encode(), bytes);
        prop_assert_eq!(decoded, DecodedImage::Rgb(img));
    }

    #[test]
    fn gray_survives_rgb_expansion(img in gray_strategy(32)) {
        prop_assert_eq!(to_grayscale(&gray_to_rgb(&img)), img);
    }

    #[test]
    fn luma_matches_real_arithmetic(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        let exact = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        let got = luma([r, g, b]) as f64;
        prop_assert!((got - exact).abs() <= 0.5 + 1e-9);
    }

    #[test]
    fn crop_matches_pixel_copy(img in rgb_strategy(30), fx in 0.0..1.0f64, fy in 0.0..1.0f64, fw in 0.0..1.0f64, fh in 0.0..1.0f64) {
        let x = (fx * img.width() as f64) as u32 % img.width();
        let y = (fy * img.height() as f64) as u32 % img.height();
        let w = 1 + (fw * (img.width() - x) as f64) as u32 % (img.width() - x);
        let h = 1 + (fh * (img.height() - y) as f64) as u32 % (img.height() - y);
        let out = crop(&img, Rect::new(x, y, w, h)).unwrap();
        prop_assert_eq!((out.width(), out.height()), (w, h));
        for j in 0..h {
            for i in 0..w {
                prop_assert_eq!(out.get(i, j), img.get(x + i, y + j));
            }
        }
    }

    #[test]
    fn resize_matches_index_formula(img in rgb_strategy(30), w in 1u32..50, h in 1u32..50) {
        let out = resize_nearest(&img, w, h).unwrap();
        for j in 0..h {
            for i in 0..w {
                let sx = (i as f64 * img.width() as f64 / w as f64).floor() as u32;
                let sy = (j as f64 * img.height() as f64 / h as f64).floor() as u32;
                prop_assert!(sx < img.width() && sy < img.height());
                prop_assert_eq!(out.get(i, j), img.get(sx, sy));
            }
        }
    }
}

#[test]
fn header_comments_and_whitespace() {
    let bytes = b"P5 # comment\n2\t# another\n 1\n255\n\x01\x02";
    let DecodedImage::Gray(g) = decode_netpbm(bytes).unwrap() else { panic!("expected gray") };
    assert_eq!((g.width(), g.height(), g.data()), (2, 1, &[1u8, 2][..]));
}

#[test]
fn trailing_bytes_are_ignored() {
    let mut bytes = encode_pgm(&GrayImage::filled(2, 2, 9).unwrap());
    bytes.extend_from_slice(b"junk");
    assert!(decode_netpbm(&bytes).is_ok());
}

#[test]
fn decode_errors() {
    assert!(matches!(decode_netpbm(b"P3\n1 1\n255\n0 0 0"), Err(NetpbmError::BadMagic { offset: 0 })));
    assert!(matches!(
        decode_netpbm(b"P5\n1 1\n65535\n\0\0"),
        Err(NetpbmError::UnsupportedMaxval { maxval: 65535, .. })
    ));
    assert!(matches!(
        decode_netpbm(b"P6\n2 2\n255\n\0\0\0"),
        Err(NetpbmError::Truncated { expected: 12, found: 3, .. })
    ));
    assert!(matches!(decode_netpbm(b"P5\nx 1\n255\n\0"), Err(NetpbmError::MalformedHeader { .. })));
    assert!(matches!(decode_netpbm(b""), Err(NetpbmError::BadMagic { .. })));
}

#[test]
fn out_of_bounds_crop_is_an_error() {
    let img = RgbImage::new(4, 4, vec![0; 48]).unwrap();
    assert!(crop(&img, Rect::new(2, 2, 3, 1)).is_err());
    assert!(resize_nearest(&img, 0, 3).is_err());
}
