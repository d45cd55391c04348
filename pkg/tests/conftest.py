# anchors pytest's rootdir so the tests directory lands on sys.path
