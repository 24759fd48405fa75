// placeholder during scaffolding
pub fn placeholder() {}
