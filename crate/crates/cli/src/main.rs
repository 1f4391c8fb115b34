fn main() {
    println!("semoran");
}
