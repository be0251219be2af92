Page({
  data: {
    takePhotoPath: '/pages/takePhoto/index'
  },
  onLoad() {
    this.setData({ ready: true })
  },
  navToCheckID() {
    wx.navigateTo({ url: '/pages/checkID/index?from=me' })
  },
  // Never bound in markup and never called.
  shareLocation() {
    wx.getLocation({
      type: 'wgs84',
      success(res) {
        console.log(res.latitude)
      }
    })
  }
})
