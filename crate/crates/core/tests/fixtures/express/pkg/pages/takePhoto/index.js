const util = require('../util/util.js')

Page({
  data: { src: '' },
  onReady() {
    util.init(this)
  }
})
