//! Generates a seeded scene, writes it as JSON plus a PGM mask, and reads it back.

use chpdet::dataset_io::{
    load_annotations, render_mask, save_annotations, synth_scene, write_atomic, ClassConfig, SceneSpec,
};

fn main() -> chpdet::Result<()> {
    let classes = ClassConfig::default();
    let spec = SceneSpec {
        count: (6, 6),
        ..SceneSpec::new(2024)
    };
    let scene = synth_scene(&spec, &classes)?;

    let dir = std::env::temp_dir().join("chpdet_synthetic_scene");
    std::fs::create_dir_all(&dir).map_err(|e| chpdet::Error::io(&dir, e))?;
    let json = dir.join("scene.json");
    save_annotations(&json, &scene)?;
    write_atomic(&dir.join("scene.pgm"), &render_mask(&scene, &classes)?)?;

    let back = load_annotations(&json, &classes)?;
    assert_eq!(back, scene);
    for (obj, b) in back.objects.iter().zip(back.boxes(&classes)?) {
        println!(
            "{:<18} center ({:6.1}, {:6.1})  {:5.1} x {:5.1} px  heading {:6.1} deg",
            obj.class,
            b.cx,
            b.cy,
            b.w,
            b.h,
            b.heading()?
        );
    }
    println!("wrote {} and scene.pgm", json.display());
    Ok(())
}
