//! Property tests over the pooling rearrangements.

use proptest::prelude::*;
use smp_core::smp::{merge_fwd, shrink_fwd, split_fwd, SampleLoc, Window};
use smp_core::tensor::{Shape4, Tensor};

fn case_strategy() -> impl Strategy<Value = (Tensor<f32>, Window)> {
    (1usize..=3, 1usize..=3, 1usize..=4, 1usize..=4, 1usize..=6, 1usize..=6).prop_flat_map(
        |(n, c, ww, wh, th, tw)| {
            let shape = Shape4::new(n, c, wh * th, ww * tw).unwrap();
            proptest::collection::vec(-1e3f32..1e3, shape.len())
                .prop_map(move |data| (Tensor::new(shape, data).unwrap(), Window { w: ww, h: wh }))
        },
    )
}

proptest! {
    #[test]
    fn split_then_merge_is_identity((x, win) in case_strategy()) {
        let (batches, meta) = split_fwd(&x, win).unwrap();
        let back = merge_fwd(&batches, &meta).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn split_preserves_the_value_multiset((x, win) in case_strategy()) {
        let (batches, _) = split_fwd(&x, win).unwrap();
        let mut a: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
        let mut b: Vec<u32> = batches.data().iter().map(|v| v.to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_multiplies_batches_and_divides_extents((x, win) in case_strategy()) {
        let (batches, _) = split_fwd(&x, win).unwrap();
        let s = x.shape();
        let b = batches.shape();
        prop_assert_eq!(b.n, s.n * win.area());
        prop_assert_eq!((b.c, b.h, b.w), (s.c, s.h / win.h, s.w / win.w));
    }

    #[test]
    fn every_shrink_batch_appears_inside_the_split((x, win) in case_strategy()) {
        let (batches, _) = split_fwd(&x, win).unwrap();
        for k in 0..win.w {
            for l in 0..win.h {
                let loc = SampleLoc::checked(k, l, win).unwrap();
                let shrunk = shrink_fwd(&x, win, loc).unwrap();
                for b in 0..x.shape().n {
                    let from_split = batches.batch_select(b * win.area() + loc.batch_offset(win)).unwrap();
                    prop_assert_eq!(shrunk.batch_select(b).unwrap(), from_split);
                }
            }
        }
    }

    #[test]
    fn indivisible_extents_are_rejected(
        n in 1usize..=2, c in 1usize..=2, h in 1usize..=17, w in 1usize..=17,
        ww in 2usize..=4, wh in 2usize..=4,
    ) {
        prop_assume!(h % wh != 0 || w % ww != 0);
        let shape = Shape4::new(n, c, h, w).unwrap();
        let x = Tensor::<f32>::zeros(shape);
        let win = Window { w: ww, h: wh };
        prop_assert!(split_fwd(&x, win).is_err());
    }
}
